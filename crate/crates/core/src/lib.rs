//! Variable selection in the multivariate linear model `Y = X B + E` when the
//! columns of `E` are dependent.
//!
//! The pipeline has three stages:
//!
//! 1. [`linmodel`]: one-way ANOVA fit of every response column, giving the
//!    residual matrix.
//! 2. [`whitening`]: estimation of the row covariance of the residuals
//!    (AR(1) or nonparametric Toeplitz), the matching whitening operator and a
//!    pooled Portmanteau test to choose between candidates.
//! 3. [`selection`]: Lasso on the whitened, vectorized model with the
//!    Kronecker design kept in factored form, a cross-validated penalty and
//!    stability selection.
//!
//! [`simulate`] generates synthetic AR(1) data sets and scores methods, and
//! [`cli`] is the batch front end.

pub mod cli;
pub mod error;
pub mod linmodel;
pub mod pipeline;
pub mod rng;
pub mod selection;
pub mod simulate;
pub mod whitening;

pub use error::{Error, Result};
pub use linmodel::{
    build_design, fit_anova, standardize, CoefficientMatrix, DesignMatrix, FactorLabels,
    ObservationMatrix, ResidualMatrix,
};
pub use selection::{
    choose_threshold, cross_validate_lambda, kronecker_matvec, lasso_solve, stability_select,
    vectorize, LassoSolution, StabilityReport, ThresholdMode, VectorizedProblem,
};
pub use whitening::{
    apply_whitening, ar1_inverse_sqrt, chi_squared_survival, fit_ar1, nonparam_inverse_sqrt,
    pooled_autocovariance, portmanteau_test, select_whitening, Ar1Fit, Autocovariance,
    WhiteningKind, WhiteningOperator, WhitenessTestResult,
};

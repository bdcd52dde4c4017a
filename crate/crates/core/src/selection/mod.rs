//! Lasso on the whitened, vectorized model with the `S′ ⊗ X` design kept in
//! factored form, cross-validated penalty and stability selection.

mod cv;
mod lasso;
mod problem;
mod stability;
mod threshold;

pub use cv::{cross_validate_lambda, fitted_whitened, fold_assignment, lambda_grid, CvOptions, CvResult};
pub use lasso::{
    lambda_max, lambda_max_dense, lambda_max_masked, lasso_solve, lasso_solve_dense,
    lasso_solve_masked, soft_threshold, CoordinateDesign, DenseDesign, KroneckerDesign,
    LassoOptions, LassoPath, LassoSolution,
};
pub use problem::{
    coefficient_matrix, kronecker_matvec, kronecker_rmatvec, unvec_columns, vec_columns, vectorize,
    vectorize_general, VectorizedProblem, DEFAULT_MATERIALIZE_BUDGET,
};
pub use stability::{stability_select, StabilityOptions, StabilityReport};
pub use threshold::{
    choose_threshold, threshold_grid, ThresholdChoice, ThresholdContext, ThresholdMode,
    ThresholdScore,
};

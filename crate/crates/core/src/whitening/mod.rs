//! Residual dependence modeling: autocovariance estimation, AR(1) and
//! nonparametric whitening operators and the pooled Portmanteau test that
//! chooses between them.

mod autocov;
mod chisq;
mod operator;
mod portmanteau;

pub use autocov::{fit_ar1, pooled_autocovariance, series_autocov, Ar1Fit, Autocovariance};
pub use chisq::{chi_squared_survival, ln_gamma, regularized_gamma_upper};
pub use operator::{
    apply_whitening, ar1_covariance, ar1_inverse_sqrt, nonparam_inverse_sqrt, toeplitz,
    toeplitz_inverse_cholesky, WhiteningKind, WhiteningOperator, RIDGE_DELTA,
};
pub use portmanteau::{
    estimate_operator, portmanteau_test, score_operator, select_whitening, StrategyScore,
    WhitenessTestResult, DEFAULT_LAGS,
};

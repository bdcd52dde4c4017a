//! The three stages chained together: ANOVA residuals, whitening choice,
//! whitened Lasso with cross-validation and stability selection.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linmodel::{fit_anova, CoefficientMatrix, DesignMatrix, ObservationMatrix, ResidualMatrix};
use crate::selection::{
    choose_threshold, cross_validate_lambda, stability_select, vectorize, CvOptions, CvResult,
    LassoOptions, StabilityOptions, StabilityReport, ThresholdChoice, ThresholdContext,
    ThresholdMode, VectorizedProblem,
};
use crate::whitening::{
    apply_whitening, estimate_operator, score_operator, select_whitening, StrategyScore,
    WhiteningKind, WhiteningOperator, DEFAULT_LAGS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhiteningMode {
    Auto,
    Identity,
    Ar1,
    Nonparam,
}

impl WhiteningMode {
    pub fn forced_kind(self) -> Option<WhiteningKind> {
        match self {
            WhiteningMode::Auto => None,
            WhiteningMode::Identity => Some(WhiteningKind::Identity),
            WhiteningMode::Ar1 => Some(WhiteningKind::Ar1),
            WhiteningMode::Nonparam => Some(WhiteningKind::Nonparametric),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub whitening: WhiteningMode,
    pub lags: usize,
    pub cv: CvOptions,
    pub stability: StabilityOptions,
    pub lasso: LassoOptions,
    pub threshold: ThresholdMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            whitening: WhiteningMode::Auto,
            lags: DEFAULT_LAGS,
            cv: CvOptions::default(),
            stability: StabilityOptions::default(),
            lasso: LassoOptions::default(),
            threshold: ThresholdMode::FixedOne,
        }
    }
}

impl PipelineConfig {
    /// Same root seed for the fold shuffle and the resamples.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.cv.seed = seed;
        self.stability.seed = seed;
        self
    }
}

/// Output of the whitening stage.
#[derive(Debug, Clone)]
pub struct WhiteningStage {
    pub operator: WhiteningOperator,
    /// One entry per candidate: identity, ar1, nonparam.
    pub scores: Vec<StrategyScore>,
}

#[derive(Debug, Clone)]
pub struct SelectionStage {
    pub problem: VectorizedProblem,
    pub cv: CvResult,
    pub stability: StabilityReport,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub coefficients: CoefficientMatrix,
    pub residuals: ResidualMatrix,
    pub whitening: WhiteningStage,
    pub selection: SelectionStage,
    pub threshold: ThresholdChoice,
}

/// Score every candidate and keep either the best one or the forced kind.
pub fn whitening_stage(resid: &ResidualMatrix, mode: WhiteningMode, lags: usize) -> Result<WhiteningStage> {
    let (best, scores) = select_whitening(resid, lags)?;
    let operator = match mode.forced_kind() {
        None => best,
        Some(kind) if kind == best.kind() => best,
        Some(kind) => estimate_operator(kind, resid.view())?,
    };
    Ok(WhiteningStage { operator, scores })
}

/// Cross-validation and stability selection on `Y S`.
pub fn selection_stage(
    y: &ObservationMatrix,
    x: &DesignMatrix,
    op: &WhiteningOperator,
    cfg: &PipelineConfig,
) -> Result<SelectionStage> {
    let yw = apply_whitening(y.values.view(), op).map_err(|e| e.at("whitening"))?;
    let problem = vectorize(yw.view(), x, op).map_err(|e| e.at("vectorize"))?;
    let cv = cross_validate_lambda(&problem, &cfg.cv, &cfg.lasso).map_err(|e| e.at("cross-validation"))?;
    let stability = stability_select(&problem, cv.lambda_cv, &cfg.stability, &cfg.lasso)
        .map_err(|e| e.at("stability selection"))?;
    Ok(SelectionStage { problem, cv, stability })
}

pub fn threshold_stage(
    y: &ObservationMatrix,
    x: &DesignMatrix,
    op: &WhiteningOperator,
    report: &StabilityReport,
    mode: ThresholdMode,
    lags: usize,
) -> Result<ThresholdChoice> {
    let ctx = ThresholdContext {
        y: y.values.view(),
        x,
        op,
        lags,
    };
    choose_threshold(report, mode, &ctx).map_err(|e| e.at("threshold"))
}

pub fn run_pipeline(y: &ObservationMatrix, x: &DesignMatrix, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let (coefficients, residuals) = fit_anova(y, x).map_err(|e| e.at("anova"))?;
    let whitening = whitening_stage(&residuals, cfg.whitening, cfg.lags).map_err(|e| e.at("whitening test"))?;
    let selection = selection_stage(y, x, &whitening.operator, cfg)?;
    let threshold = threshold_stage(y, x, &whitening.operator, &selection.stability, cfg.threshold, cfg.lags)?;
    Ok(PipelineResult {
        coefficients,
        residuals,
        whitening,
        selection,
        threshold,
    })
}

/// Pooled whiteness test of the ANOVA residuals after whitening with `op`.
pub fn residual_whiteness(resid: &ResidualMatrix, op: &WhiteningOperator, lags: usize) -> Result<StrategyScore> {
    score_operator(resid.view(), op, lags)
}

/// Boolean p×q mask of a support list.
pub fn support_mask(support: &[(usize, usize)], p: usize, q: usize) -> Array2<bool> {
    let mut m = Array2::from_elem((p, q), false);
    for &(c, j) in support {
        m[[c, j]] = true;
    }
    m
}

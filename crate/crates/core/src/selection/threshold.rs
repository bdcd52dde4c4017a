use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::stability::StabilityReport;
use crate::error::{check_dim, Result};
use crate::linmodel::{refit_on_support, DesignMatrix};
use crate::whitening::{apply_whitening, portmanteau_test, WhiteningOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Keep only coefficients selected in every resample.
    FixedOne,
    /// Threshold whose refitted residuals look whitest.
    MaxPvalue,
}

/// Data needed to score a threshold by the whiteness of its residuals.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdContext<'a> {
    /// Observations on the scale used for the fit (not whitened).
    pub y: ArrayView2<'a, f64>,
    pub x: &'a DesignMatrix,
    pub op: &'a WhiteningOperator,
    pub lags: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdScore {
    pub threshold: f64,
    pub pvalue: f64,
    pub support_size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdChoice {
    pub mode: ThresholdMode,
    pub threshold: f64,
    pub support: Vec<(usize, usize)>,
    pub scores: Vec<ThresholdScore>,
}

/// Candidate thresholds 0.50, 0.55, …, 1.00.
pub fn threshold_grid() -> Vec<f64> {
    (0..=10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// Pick the stability threshold. `MaxPvalue` refits the ANOVA restricted to
/// each candidate support, whitens the residuals with the operator in `ctx`
/// and keeps the threshold with the largest pooled whiteness p-value (the
/// larger threshold on ties).
pub fn choose_threshold(
    report: &StabilityReport,
    mode: ThresholdMode,
    ctx: &ThresholdContext<'_>,
) -> Result<ThresholdChoice> {
    match mode {
        ThresholdMode::FixedOne => Ok(ThresholdChoice {
            mode,
            threshold: 1.0,
            support: report.support_at(1.0),
            scores: Vec::new(),
        }),
        ThresholdMode::MaxPvalue => {
            check_dim("frequency rows vs design", ctx.x.p(), report.frequencies.nrows())?;
            check_dim("frequency columns vs responses", ctx.y.ncols(), report.frequencies.ncols())?;
            let mut scores = Vec::new();
            for t in threshold_grid() {
                let mask = report.support_mask(t);
                let resid = refit_on_support(ctx.y, ctx.x, &mask)?;
                let white = apply_whitening(resid.view(), ctx.op)?;
                let test = portmanteau_test(white.view(), ctx.lags)?;
                scores.push(ThresholdScore {
                    threshold: t,
                    pvalue: test.pvalue,
                    support_size: mask.iter().filter(|&&b| b).count(),
                });
            }
            let mut best = 0;
            for (i, s) in scores.iter().enumerate() {
                if s.pvalue >= scores[best].pvalue {
                    best = i;
                }
            }
            let threshold = scores[best].threshold;
            Ok(ThresholdChoice {
                mode,
                threshold,
                support: report.support_at(threshold),
                scores,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spans_half_to_one() {
        let g = threshold_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[10], 1.0);
        assert_eq!(g[1], 0.55);
    }
}

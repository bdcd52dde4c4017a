use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_dataset, SimulationConfig};
use super::roc::roc_from_frequencies;
use crate::error::{Error, Result};
use crate::linmodel::{fit_anova, ObservationMatrix};
use crate::pipeline::{residual_whiteness, selection_stage, PipelineConfig};
use crate::rng::{child_seed, Stream};
use crate::whitening::{ar1_inverse_sqrt, estimate_operator, WhiteningKind, WhiteningOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RawLasso,
    Ar1Whitened,
    NonparamWhitened,
    /// AR(1) operator with the generating coefficient.
    OracleWhitened,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::RawLasso,
        Method::Ar1Whitened,
        Method::NonparamWhitened,
        Method::OracleWhitened,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::RawLasso => "raw-lasso",
            Method::Ar1Whitened => "ar1-whitened",
            Method::NonparamWhitened => "nonparam-whitened",
            Method::OracleWhitened => "oracle-whitened",
        }
    }
}

/// Scores of one method on one simulated replicate.
#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub replicate: usize,
    pub method: Method,
    pub auc: f64,
    /// Pooled whiteness p-value of the whitened ANOVA residuals.
    pub whiteness_pvalue: f64,
    pub seconds: f64,
    pub lambda_cv: f64,
    /// True and false positives of the threshold-one support.
    pub true_positives: usize,
    pub false_positives: usize,
    #[serde(skip)]
    pub frequencies: Array2<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replicates: usize,
    pub auc_mean: f64,
    pub auc_sd: f64,
    pub auc_median: f64,
    pub pvalue_mean: f64,
    pub pvalue_sd: f64,
    pub seconds_mean: f64,
}

fn operator_for(method: Method, resid: &crate::linmodel::ResidualMatrix, cfg: &SimulationConfig) -> Result<WhiteningOperator> {
    match method {
        Method::RawLasso => Ok(WhiteningOperator::identity(cfg.q)),
        Method::Ar1Whitened => estimate_operator(WhiteningKind::Ar1, resid.view()),
        Method::NonparamWhitened => estimate_operator(WhiteningKind::Nonparametric, resid.view()),
        Method::OracleWhitened => ar1_inverse_sqrt(cfg.phi1, cfg.q),
    }
}

/// Run every method on replicate `replicate` of `cfg`.
pub fn run_replicate(
    cfg: &SimulationConfig,
    replicate: usize,
    methods: &[Method],
    pipeline: &PipelineConfig,
) -> Result<Vec<MethodOutcome>> {
    let data = generate_dataset(cfg, replicate)?;
    let y = ObservationMatrix::raw(data.y.clone());
    let pcfg = pipeline
        .clone()
        .with_seed(child_seed(cfg.seed, Stream::Replicate, replicate as u64));
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let start = Instant::now();
        let (_, resid) = fit_anova(&y, &data.x)?;
        let op = operator_for(method, &resid, cfg)?;
        let stage = selection_stage(&y, &data.x, &op, &pcfg)?;
        let seconds = start.elapsed().as_secs_f64();
        let whiteness = residual_whiteness(&resid, &op, pcfg.lags)?;
        let freq = stage.stability.frequencies;
        let roc = roc_from_frequencies(freq.view(), data.true_b.view())?;
        let (mut tp, mut fp) = (0, 0);
        for (f, b) in freq.iter().zip(data.true_b.iter()) {
            if *f >= 1.0 {
                if *b != 0.0 {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        out.push(MethodOutcome {
            replicate,
            method,
            auc: roc.auc,
            whiteness_pvalue: whiteness.test.pvalue,
            seconds,
            lambda_cv: stage.cv.lambda_cv,
            true_positives: tp,
            false_positives: fp,
            frequencies: freq,
        });
    }
    Ok(out)
}

/// All replicates of `cfg`, run in parallel; output ordered by replicate
/// then method.
pub fn run_comparison(
    cfg: &SimulationConfig,
    methods: &[Method],
    pipeline: &PipelineConfig,
) -> Result<Vec<MethodOutcome>> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::invalid("no methods to compare"));
    }
    let per_rep: Vec<Result<Vec<MethodOutcome>>> = (0..cfg.n_replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, r, methods, pipeline))
        .collect();
    let mut out = Vec::new();
    for r in per_rep {
        out.extend(r?);
    }
    Ok(out)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len().is_multiple_of(2) {
        (s[m - 1] + s[m]) / 2.0
    } else {
        s[m]
    }
}

pub fn summarize(outcomes: &[MethodOutcome]) -> Vec<MethodSummary> {
    let mut methods: Vec<Method> = Vec::new();
    for o in outcomes {
        if !methods.contains(&o.method) {
            methods.push(o.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let rows: Vec<&MethodOutcome> = outcomes.iter().filter(|o| o.method == m).collect();
            let auc: Vec<f64> = rows.iter().map(|o| o.auc).collect();
            let pv: Vec<f64> = rows.iter().map(|o| o.whiteness_pvalue).collect();
            let secs: Vec<f64> = rows.iter().map(|o| o.seconds).collect();
            let (auc_mean, auc_sd) = mean_sd(&auc);
            let (pvalue_mean, pvalue_sd) = mean_sd(&pv);
            MethodSummary {
                method: m,
                replicates: rows.len(),
                auc_mean,
                auc_sd,
                auc_median: median(&auc),
                pvalue_mean,
                pvalue_sd,
                seconds_mean: mean_sd(&secs).0,
            }
        })
        .collect()
}

/// Tidy CSV: one row per (replicate, method, metric).
pub fn write_tidy_csv<W: Write>(outcomes: &[MethodOutcome], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["replicate", "method", "metric", "value"])?;
    for o in outcomes {
        let metrics: [(&str, f64); 6] = [
            ("auc", o.auc),
            ("whiteness_pvalue", o.whiteness_pvalue),
            ("seconds", o.seconds),
            ("lambda_cv", o.lambda_cv),
            ("true_positives", o.true_positives as f64),
            ("false_positives", o.false_positives as f64),
        ];
        for (name, v) in metrics {
            wtr.write_record([
                o.replicate.to_string(),
                o.method.name().to_string(),
                name.to_string(),
                format!("{v:.17e}"),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::Serialize;

use super::autocov::{fit_ar1, pooled_autocovariance};
use super::chisq::chi_squared_survival;
use super::operator::{
    apply_whitening, ar1_inverse_sqrt, nonparam_inverse_sqrt, WhiteningKind, WhiteningOperator,
};
use crate::error::{Error, Result};
use crate::linmodel::ResidualMatrix;

/// Default number of autocorrelation lags in the whiteness test.
pub const DEFAULT_LAGS: usize = 10;

/// Pooled Portmanteau test of the hypothesis that every row is white noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhitenessTestResult {
    /// `q · Σ_i Σ_h ρ̂_i(h)²`
    pub statistic: f64,
    /// `n · H`
    pub dof: usize,
    pub pvalue: f64,
    pub row_statistics: Vec<f64>,
    /// Row-wise p-values against χ²(H).
    pub row_pvalues: Vec<f64>,
    pub lags: usize,
}

/// Sample autocorrelations ρ̂(1..=lags) of one series (mean removed,
/// divide-by-length autocovariances).
fn autocorrelations(row: &[f64], lags: usize) -> Option<Vec<f64>> {
    let q = row.len();
    let mean = row.iter().sum::<f64>() / q as f64;
    let x: Vec<f64> = row.iter().map(|v| v - mean).collect();
    let g0: f64 = x.iter().map(|v| v * v).sum();
    if !(g0 > 0.0) || g0 <= 1e-28 * row.iter().map(|v| v * v).sum::<f64>() {
        return None;
    }
    Some(
        (1..=lags)
            .map(|h| x[..q - h].iter().zip(&x[h..]).map(|(a, b)| a * b).sum::<f64>() / g0)
            .collect(),
    )
}

pub fn portmanteau_test(e: ArrayView2<'_, f64>, lags: usize) -> Result<WhitenessTestResult> {
    let (n, q) = e.dim();
    if lags == 0 || lags >= q {
        return Err(Error::invalid(format!(
            "lag count {lags} must satisfy 1 <= H < q = {q}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("no rows to test"));
    }
    let rows: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = e.row(i).to_vec();
            let rho = autocorrelations(&row, lags).ok_or(Error::ZeroVariance { row: i })?;
            Ok(q as f64 * rho.iter().map(|r| r * r).sum::<f64>())
        })
        .collect();
    let row_statistics = rows.into_iter().collect::<Result<Vec<f64>>>()?;
    let statistic: f64 = row_statistics.iter().sum();
    let dof = n * lags;
    Ok(WhitenessTestResult {
        statistic,
        dof,
        pvalue: chi_squared_survival(statistic, dof),
        row_pvalues: row_statistics
            .iter()
            .map(|&s| chi_squared_survival(s, lags))
            .collect(),
        row_statistics,
        lags,
    })
}

/// Score of one whitening candidate.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyScore {
    pub kind: WhiteningKind,
    pub test: WhitenessTestResult,
    /// Fitted AR(1) coefficient for the `ar1` candidate.
    pub phi1: Option<f64>,
    pub regularization: Option<f64>,
}

/// Estimate the whitening operator of the given kind from residuals.
pub fn estimate_operator(kind: WhiteningKind, e: ArrayView2<'_, f64>) -> Result<WhiteningOperator> {
    let q = e.ncols();
    match kind {
        WhiteningKind::Identity => Ok(WhiteningOperator::identity(q)),
        WhiteningKind::Ar1 => ar1_inverse_sqrt(fit_ar1(e)?.phi1, q),
        WhiteningKind::Nonparametric => {
            let gamma = pooled_autocovariance(e, q - 1)?;
            nonparam_inverse_sqrt(&gamma)
        }
    }
}

/// Whiten `e` with `op` and run the pooled test.
pub fn score_operator(e: ArrayView2<'_, f64>, op: &WhiteningOperator, lags: usize) -> Result<StrategyScore> {
    let w = apply_whitening(e, op)?;
    Ok(StrategyScore {
        kind: op.kind(),
        test: portmanteau_test(w.view(), lags)?,
        phi1: op.phi1(),
        regularization: op.regularization,
    })
}

/// Try identity, AR(1) and nonparametric whitening and keep the one whose
/// whitened residuals have the largest pooled p-value. Near-equal p-values
/// resolve towards the simpler model.
pub fn select_whitening(
    e: &ResidualMatrix,
    lags: usize,
) -> Result<(WhiteningOperator, Vec<StrategyScore>)> {
    let q = e.values.ncols();
    if lags == 0 || lags >= q {
        return Err(Error::invalid(format!(
            "lag count {lags} must satisfy 1 <= H < q = {q}"
        )));
    }
    let mut ops = Vec::with_capacity(3);
    let mut scores = Vec::with_capacity(3);
    for kind in WhiteningKind::ALL {
        let op = estimate_operator(kind, e.view()).map_err(|err| err.at(kind.name()))?;
        scores.push(score_operator(e.view(), &op, lags)?);
        ops.push(op);
    }
    let pvalues: Vec<f64> = scores.iter().map(|s| s.test.pvalue).collect();
    let op = ops.swap_remove(preferred_index(&pvalues));
    Ok((op, scores))
}

/// Index of the largest p-value; candidates within a few ulps of the current
/// best do not displace an earlier (simpler) one.
fn preferred_index(pvalues: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in pvalues.iter().enumerate().skip(1) {
        if p > pvalues[best] + 4.0 * f64::EPSILON {
            best = i;
        }
    }
    best
}

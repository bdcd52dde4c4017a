use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Pooled empirical autocovariances γ̂(0..=max_lag) of the residual rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Autocovariance {
    pub gamma: Vec<f64>,
}

impl Autocovariance {
    pub fn max_lag(&self) -> usize {
        self.gamma.len() - 1
    }
}

/// AR(1) fit by order-1 Yule–Walker on each row, averaged over rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar1Fit {
    pub phi1: f64,
    pub phi1_rows: Vec<f64>,
    pub sigma2: f64,
    /// Set when the mean estimate was pulled back inside (−1, 1).
    pub clamped: bool,
}

pub(crate) const PHI_MARGIN: f64 = 1e-6;

/// Biased (divide-by-length) autocovariance of a series at lag `h`, without
/// removing the series mean.
pub fn series_autocov(x: ArrayView1<'_, f64>, h: usize) -> f64 {
    let q = x.len();
    if h >= q {
        return 0.0;
    }
    let a = x.slice(ndarray::s![..q - h]);
    let b = x.slice(ndarray::s![h..]);
    a.dot(&b) / q as f64
}

pub fn pooled_autocovariance(e: ArrayView2<'_, f64>, max_lag: usize) -> Result<Autocovariance> {
    let (n, q) = e.dim();
    if max_lag >= q {
        return Err(Error::invalid(format!(
            "maximum lag {max_lag} must be smaller than the row length {q}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("residual matrix has no rows"));
    }
    let per_row: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = e.row(i);
            (0..=max_lag).map(|h| series_autocov(row, h)).collect()
        })
        .collect();
    // row-order reduction keeps the result independent of scheduling
    let mut gamma = vec![0.0; max_lag + 1];
    for row in &per_row {
        for (g, v) in gamma.iter_mut().zip(row) {
            *g += v;
        }
    }
    gamma.iter_mut().for_each(|g| *g /= n as f64);
    Ok(Autocovariance { gamma })
}

pub fn fit_ar1(e: ArrayView2<'_, f64>) -> Result<Ar1Fit> {
    let (n, q) = e.dim();
    if n == 0 || q < 2 {
        return Err(Error::invalid("AR(1) fit needs at least one row of length 2"));
    }
    let mut phi1_rows = Vec::with_capacity(n);
    let mut g0_sum = 0.0;
    for (i, row) in e.rows().into_iter().enumerate() {
        let g0 = series_autocov(row, 0);
        if !(g0 > 0.0) {
            return Err(Error::ZeroVariance { row: i });
        }
        phi1_rows.push(series_autocov(row, 1) / g0);
        g0_sum += g0;
    }
    let mean = phi1_rows.iter().sum::<f64>() / n as f64;
    let bound = 1.0 - PHI_MARGIN;
    let phi1 = mean.clamp(-bound, bound);
    let sigma2 = g0_sum / n as f64 * (1.0 - phi1 * phi1);
    Ok(Ar1Fit {
        phi1,
        phi1_rows,
        sigma2,
        clamped: phi1 != mean,
    })
}

#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

/// Write a sample table in the CLI input format.
pub fn write_table(path: &Path, labels: &[String], values: ArrayView2<'_, f64>) {
    let mut f = std::fs::File::create(path).unwrap();
    write!(f, "condition").unwrap();
    for j in 0..values.ncols() {
        write!(f, ",r{j}").unwrap();
    }
    writeln!(f).unwrap();
    for (l, row) in labels.iter().zip(values.rows()) {
        write!(f, "{l}").unwrap();
        for v in row {
            write!(f, ",{v:e}").unwrap();
        }
        writeln!(f).unwrap();
    }
}

pub fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Explicit Kronecker product, the dense reference for the factored design.
pub fn kron(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// Column-stacked `vec(M)`.
pub fn vec_cols(m: ArrayView2<'_, f64>) -> Array1<f64> {
    m.t().iter().copied().collect()
}

/// Largest violation of the Lasso optimality conditions for
/// `‖y − Aβ‖² + λ‖β‖₁`, recomputed from scratch.
pub fn kkt_violation(a: ArrayView2<'_, f64>, y: &Array1<f64>, beta: &Array1<f64>, lambda: f64) -> f64 {
    let r = y - &a.dot(beta);
    let g = a.t().dot(&r) * 2.0;
    g.iter()
        .zip(beta)
        .map(|(&g, &b)| {
            if b == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Random positive-definite autocovariance sequence of length `q`: a
/// positive mixture of cosines (a nonnegative spectral measure) plus a
/// white-noise nugget.
pub fn random_pd_autocov<R: Rng>(q: usize, rng: &mut R) -> Vec<f64> {
    let k = rng.random_range(1..=4);
    let comps: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random_range(0.1..2.0), rng.random_range(0.0..std::f64::consts::PI)))
        .collect();
    let nugget = rng.random_range(0.2..1.0);
    (0..q)
        .map(|h| {
            let s: f64 = comps.iter().map(|&(w, om)| w * (om * h as f64).cos()).sum();
            s + if h == 0 { nugget } else { 0.0 }
        })
        .collect()
}

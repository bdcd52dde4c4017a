use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::lasso::{lambda_max, KroneckerDesign, LassoOptions, LassoPath};
use super::problem::VectorizedProblem;
use crate::error::{Error, Result};
use crate::rng::{child_rng, Stream};

#[derive(Debug, Clone)]
pub struct CvOptions {
    pub n_folds: usize,
    pub n_lambda: usize,
    /// Smallest grid value as a fraction of λ_max.
    pub lambda_min_ratio: f64,
    pub seed: u64,
    /// Stop descending the grid once the mean held-out error has gone this
    /// many consecutive points without a new minimum. `None` walks the whole
    /// grid.
    pub patience: Option<usize>,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            n_folds: 10,
            n_lambda: 100,
            lambda_min_ratio: 1e-3,
            seed: 42,
            patience: Some(10),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CvResult {
    pub lambda_cv: f64,
    /// Position of `lambda_cv` in `grid`.
    pub index: usize,
    pub grid: Vec<f64>,
    /// Held-out mean squared error averaged over folds, one entry per
    /// evaluated grid point (a prefix of `grid` when the path stopped early).
    pub mean_error: Vec<f64>,
    #[serde(skip)]
    pub fold_error: Array2<f64>,
}

/// Log-spaced penalties from `lambda_max` down to `lambda_max · ratio`.
pub fn lambda_grid(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => {
            let step = ratio.ln() / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        lambda_max * ratio
                    } else {
                        lambda_max * (step * i as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Fold label of every vectorized observation, from a seeded shuffle.
pub fn fold_assignment(n_obs: usize, n_folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n_obs).collect();
    perm.shuffle(&mut child_rng(seed, Stream::CvFolds, 0));
    let mut fold = vec![0; n_obs];
    for (t, &i) in perm.iter().enumerate() {
        fold[i] = t % n_folds;
    }
    fold
}

/// Whitened fitted values `X B S` as an n×q matrix.
pub fn fitted_whitened(pb: &VectorizedProblem, beta: ArrayView1<'_, f64>) -> Array2<f64> {
    let (p, q) = (pb.p(), pb.q());
    let rows = pb.sparse_rows();
    let mut bs = Array2::<f64>::zeros((p, q));
    for (idx, &b) in beta.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        let (c, j) = (idx % p, idx / p);
        let (ks, vs) = rows.row(j);
        for (&k, &s) in ks.iter().zip(vs) {
            bs[[c, k]] += b * s;
        }
    }
    pb.design().dot(&bs)
}

/// K-fold cross-validation over the vectorized observations. Each fold runs
/// a warm-started path down the grid; the penalty with the smallest mean
/// held-out error wins (the larger penalty on ties).
pub fn cross_validate_lambda(pb: &VectorizedProblem, opts: &CvOptions, lasso: &LassoOptions) -> Result<CvResult> {
    let n_obs = pb.n_obs();
    if opts.n_lambda == 0 {
        return Err(Error::invalid("empty penalty grid"));
    }
    if opts.n_folds < 2 || n_obs < opts.n_folds {
        return Err(Error::invalid(format!(
            "{} folds need at least that many observations (have {n_obs})",
            opts.n_folds
        )));
    }
    let lmax = lambda_max(pb);
    if !(lmax > 0.0) {
        return Err(Error::invalid("response is orthogonal to the design; no penalty to tune"));
    }
    let grid = lambda_grid(lmax, opts.n_lambda, opts.lambda_min_ratio);
    let fold = fold_assignment(n_obs, opts.n_folds, opts.seed);
    let n = pb.n();
    let y = pb.whitened();

    struct Fold<'a> {
        path: LassoPath<KroneckerDesign<'a>>,
        held: Vec<usize>,
    }
    let masks: Vec<Vec<bool>> = (0..opts.n_folds)
        .map(|f| fold.iter().map(|&g| g != f).collect())
        .collect();
    let mut folds = masks
        .iter()
        .map(|mask| {
            let held: Vec<usize> = (0..n_obs).filter(|&i| !mask[i]).collect();
            Ok(Fold {
                path: LassoPath::new(KroneckerDesign::new(pb, Some(mask))?),
                held,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    let mut mean_error = Vec::with_capacity(grid.len());
    let mut index = 0;
    for (l, &lam) in grid.iter().enumerate() {
        let errs = folds
            .par_iter_mut()
            .map(|fd| {
                let sol = fd.path.solve(lam, lasso)?;
                let fit = fitted_whitened(pb, sol.beta.view());
                let sse: f64 = fd
                    .held
                    .iter()
                    .map(|&t| {
                        let (i, k) = (t % n, t / n);
                        let r = y[[i, k]] - fit[[i, k]];
                        r * r
                    })
                    .sum();
                Ok(sse / fd.held.len() as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        // Fold order is fixed, so the sum is reproducible.
        let mean = errs.iter().sum::<f64>() / opts.n_folds as f64;
        columns.push(errs);
        mean_error.push(mean);
        if mean < mean_error[index] {
            index = l;
        }
        if opts.patience.is_some_and(|k| l - index >= k) {
            break;
        }
    }
    let mut fold_error = Array2::zeros((opts.n_folds, columns.len()));
    for (l, errs) in columns.iter().enumerate() {
        for (f, &e) in errs.iter().enumerate() {
            fold_error[[f, l]] = e;
        }
    }
    Ok(CvResult {
        lambda_cv: grid[index],
        index,
        grid,
        mean_error,
        fold_error,
    })
}

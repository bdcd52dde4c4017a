use ndarray::Array2;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use super::lasso::{lasso_solve, KroneckerDesign, LassoOptions, LassoPath};
use super::problem::VectorizedProblem;
use crate::error::{Error, Result};
use crate::rng::{child_rng, Stream};

#[derive(Debug, Clone)]
pub struct StabilityOptions {
    pub n_resamples: usize,
    pub seed: u64,
    /// Abort when more than this fraction of resamples fail to converge.
    pub max_failure_rate: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            n_resamples: 5000,
            seed: 42,
            max_failure_rate: 0.01,
        }
    }
}

/// Selection frequencies over half-size subsamples of the vectorized
/// observations, all fitted at the same penalty.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// p×q fraction of successful resamples selecting each coefficient.
    #[serde(skip)]
    pub frequencies: Array2<f64>,
    #[serde(skip)]
    pub counts: Array2<u32>,
    pub lambda_cv: f64,
    pub n_resamples: usize,
    pub n_failed: usize,
}

/// Comparison slack for thresholds computed in floating point (0.55 etc.).
const THRESHOLD_SLACK: f64 = 1e-12;

impl StabilityReport {
    /// Number of resamples entering the frequencies.
    pub fn n_used(&self) -> usize {
        self.n_resamples - self.n_failed
    }

    pub fn support_mask(&self, threshold: f64) -> Array2<bool> {
        self.frequencies.mapv(|f| f >= threshold - THRESHOLD_SLACK)
    }

    /// `(level, response)` pairs with frequency at least `threshold`, in
    /// response-major order.
    pub fn support_at(&self, threshold: f64) -> Vec<(usize, usize)> {
        let (p, q) = self.frequencies.dim();
        let mut out = Vec::new();
        for j in 0..q {
            for c in 0..p {
                if self.frequencies[[c, j]] >= threshold - THRESHOLD_SLACK {
                    out.push((c, j));
                }
            }
        }
        out
    }
}

/// Draw `n_resamples` subsets of ⌊nq/2⌋ observations without replacement,
/// solve the Lasso at `lambda_cv` on each and count selections.
///
/// Resamples that fail to converge are dropped with a warning; if more than
/// `max_failure_rate` of them fail the whole run is aborted.
pub fn stability_select(
    pb: &VectorizedProblem,
    lambda_cv: f64,
    opts: &StabilityOptions,
    lasso: &LassoOptions,
) -> Result<StabilityReport> {
    let n_obs = pb.n_obs();
    if n_obs < 2 {
        return Err(Error::invalid("stability selection needs at least two observations"));
    }
    if opts.n_resamples == 0 {
        return Err(Error::invalid("at least one resample is required"));
    }
    let half = n_obs / 2;
    let (p, q) = (pb.p(), pb.q());
    // warm start every resample from the full-data fit
    let start = lasso_solve(pb, lambda_cv, None, lasso)?.beta.to_vec();

    let outcomes: Vec<Result<Option<Vec<usize>>>> = (0..opts.n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = child_rng(opts.seed, Stream::Resample, r as u64);
            let mut mask = vec![false; n_obs];
            for i in sample(&mut rng, n_obs, half) {
                mask[i] = true;
            }
            let mut path = LassoPath::new(KroneckerDesign::new(pb, Some(&mask))?);
            path.set_beta(&start)?;
            match path.solve(lambda_cv, lasso) {
                Ok(sol) => Ok(Some(sol.support())),
                Err(e @ Error::NonConvergence { .. }) => {
                    log::warn!("resample {r} dropped: {e}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut counts = Array2::<u32>::zeros((p, q));
    let mut n_failed = 0;
    for outcome in outcomes {
        match outcome? {
            Some(support) => {
                for idx in support {
                    counts[[idx % p, idx / p]] += 1;
                }
            }
            None => n_failed += 1,
        }
    }
    if n_failed as f64 > opts.max_failure_rate * opts.n_resamples as f64 {
        return Err(Error::ResampleFailures {
            failed: n_failed,
            total: opts.n_resamples,
        });
    }
    let used = (opts.n_resamples - n_failed) as f64;
    Ok(StabilityReport {
        frequencies: counts.mapv(|c| c as f64 / used),
        counts,
        lambda_cv,
        n_resamples: opts.n_resamples,
        n_failed,
    })
}

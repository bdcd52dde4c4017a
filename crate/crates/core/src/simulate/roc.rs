use ndarray::ArrayView2;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve of `scores` as a detector of the nonzero entries of `truth`,
/// sweeping the threshold down through the distinct score values. Tied
/// scores enter together, so ties contribute half credit to the AUC.
pub fn roc_from_frequencies(scores: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<RocCurve> {
    check_dim("score rows", truth.nrows(), scores.nrows())?;
    check_dim("score columns", truth.ncols(), scores.ncols())?;
    let mut pairs: Vec<(f64, bool)> = scores
        .iter()
        .zip(truth.iter())
        .map(|(&s, &t)| (s, t != 0.0))
        .collect();
    let n_pos = pairs.iter().filter(|(_, t)| *t).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::invalid("true support is empty; AUC is undefined"));
    }
    if n_neg == 0 {
        return Err(Error::invalid("true support is full; AUC is undefined"));
    }
    if pairs.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < pairs.len() {
        let s = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == s {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

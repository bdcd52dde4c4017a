//! Cyclic coordinate descent for `‖y − A β‖² + λ‖β‖₁` (no 1/(2n) rescaling).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::problem::{SparseRows, VectorizedProblem};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone)]
pub struct LassoOptions {
    /// Sweeps stop once no coefficient moves by more than
    /// `tol · max(1, ‖β‖∞)`.
    pub tol: f64,
    /// Required KKT certificate at return.
    pub kkt_tol: f64,
    pub max_sweeps: usize,
    /// Keep the criterion value after every sweep.
    pub record_objective: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-7,
            kkt_tol: 1e-6,
            max_sweeps: 100_000,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub beta: Array1<f64>,
    pub lambda: f64,
    pub objective: f64,
    /// Coordinate sweeps performed (full and active-set).
    pub iterations: usize,
    pub kkt_gap: f64,
    pub objective_trace: Vec<f64>,
}

impl LassoSolution {
    pub fn support(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A least-squares design seen one coordinate at a time, carrying whatever
/// residual state it needs to answer `grad` after `update`s.
pub trait CoordinateDesign {
    fn n_coef(&self) -> usize;
    /// `‖A_j‖²`
    fn norm_sq(&self, j: usize) -> f64;
    /// `A_j′ r` for the current residual `r = y − A β`.
    fn grad(&self, j: usize) -> f64;
    /// Record `β_j += delta`.
    fn update(&mut self, j: usize, delta: f64);
    /// Recompute the residual state for `beta`.
    fn reset(&mut self, beta: &[f64]);
    /// `‖y − A β‖²` over the active observations.
    fn residual_sq(&self, beta: &[f64]) -> f64;
}

#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Explicit design matrix with a maintained residual vector.
pub struct DenseDesign<'a> {
    /// Columns of A stored as rows for contiguous access.
    cols: Array2<f64>,
    y: ArrayView1<'a, f64>,
    r: Array1<f64>,
    norms: Vec<f64>,
}

impl<'a> DenseDesign<'a> {
    pub fn new(a: ArrayView2<'_, f64>, y: ArrayView1<'a, f64>) -> Result<Self> {
        check_dim("response length vs design rows", a.nrows(), y.len())?;
        let cols = a.t().as_standard_layout().into_owned();
        let norms = cols.rows().into_iter().map(|c| c.dot(&c)).collect();
        Ok(DenseDesign {
            cols,
            y,
            r: y.to_owned(),
            norms,
        })
    }
}

impl CoordinateDesign for DenseDesign<'_> {
    fn n_coef(&self) -> usize {
        self.cols.nrows()
    }

    fn norm_sq(&self, j: usize) -> f64 {
        self.norms[j]
    }

    fn grad(&self, j: usize) -> f64 {
        self.cols.row(j).dot(&self.r)
    }

    fn update(&mut self, j: usize, delta: f64) {
        self.r.scaled_add(-delta, &self.cols.row(j));
    }

    fn reset(&mut self, beta: &[f64]) {
        self.r.assign(&self.y);
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                self.r.scaled_add(-b, &self.cols.row(j));
            }
        }
    }

    fn residual_sq(&self, _beta: &[f64]) -> f64 {
        self.r.dot(&self.r)
    }
}

/// `S′ ⊗ X` in factored form, optionally restricted to a subset of the
/// vectorized observations.
///
/// Keeps `G = X′ (M ∘ R)` (p×q) where `R` is the n×q residual and `M` the
/// observation mask. The gradient of coefficient `(c, j)` is `Σ_k S[j,k] G[c,k]`
/// and an update of `(c, j)` by `δ` changes `G[·, k]` by `−δ S[j,k] A_k[·, c]`
/// with `A_k = Σ_i M[i,k] x_i x_i′`.
pub struct KroneckerDesign<'a> {
    pb: &'a VectorizedProblem,
    rows: &'a SparseRows,
    mask: Option<&'a [bool]>,
    n: usize,
    p: usize,
    q: usize,
    /// p×p Gram matrices, one per response column when masked.
    gram: Vec<f64>,
    g: Vec<f64>,
    norms: Vec<f64>,
}

impl<'a> KroneckerDesign<'a> {
    pub fn new(pb: &'a VectorizedProblem, mask: Option<&'a [bool]>) -> Result<Self> {
        let (n, p, q) = (pb.n(), pb.p(), pb.q());
        if let Some(m) = mask {
            check_dim("observation mask", n * q, m.len())?;
        }
        let x = pb.design();
        let gram = match mask {
            None => {
                let xtx = x.t().dot(&x);
                xtx.iter().copied().collect()
            }
            Some(m) => {
                let mut g = vec![0.0; q * p * p];
                for k in 0..q {
                    let block = &mut g[k * p * p..(k + 1) * p * p];
                    for i in 0..n {
                        if !m[i + k * n] {
                            continue;
                        }
                        for a in 0..p {
                            let xa = x[[i, a]];
                            if xa == 0.0 {
                                continue;
                            }
                            for b in 0..p {
                                block[a * p + b] += xa * x[[i, b]];
                            }
                        }
                    }
                }
                g
            }
        };
        let rows = pb.sparse_rows();
        let mut norms = vec![0.0; p * q];
        for j in 0..q {
            let (idx, val) = rows.row(j);
            for c in 0..p {
                let mut acc = 0.0;
                for (&k, &s) in idx.iter().zip(val) {
                    acc += s * s * gram_entry(&gram, mask.is_some(), p, k, c, c);
                }
                norms[c + j * p] = acc;
            }
        }
        let mut d = KroneckerDesign {
            pb,
            rows,
            mask,
            n,
            p,
            q,
            gram,
            g: vec![0.0; p * q],
            norms,
        };
        d.reset(&vec![0.0; p * q]);
        Ok(d)
    }

    /// Masked residual matrix `M ∘ (Y S − X B S)`.
    fn residual(&self, beta: &[f64]) -> Array2<f64> {
        let (n, p, q) = (self.n, self.p, self.q);
        let mut bs = Array2::<f64>::zeros((p, q));
        for (idx, &b) in beta.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let (c, j) = (idx % p, idx / p);
            let (ks, vs) = self.rows.row(j);
            for (&k, &s) in ks.iter().zip(vs) {
                bs[[c, k]] += b * s;
            }
        }
        let mut r = &self.pb.whitened() - &self.pb.design().dot(&bs);
        if let Some(m) = self.mask {
            for k in 0..q {
                for i in 0..n {
                    if !m[i + k * n] {
                        r[[i, k]] = 0.0;
                    }
                }
            }
        }
        r
    }
}

#[inline]
fn gram_entry(gram: &[f64], per_column: bool, p: usize, k: usize, a: usize, b: usize) -> f64 {
    if per_column {
        gram[k * p * p + a * p + b]
    } else {
        gram[a * p + b]
    }
}

impl CoordinateDesign for KroneckerDesign<'_> {
    fn n_coef(&self) -> usize {
        self.p * self.q
    }

    fn norm_sq(&self, j: usize) -> f64 {
        self.norms[j]
    }

    #[inline]
    fn grad(&self, idx: usize) -> f64 {
        let (c, j) = (idx % self.p, idx / self.p);
        let (ks, vs) = self.rows.row(j);
        let g = &self.g[c * self.q..(c + 1) * self.q];
        ks.iter().zip(vs).map(|(&k, &s)| s * g[k]).sum()
    }

    fn update(&mut self, idx: usize, delta: f64) {
        let (p, q) = (self.p, self.q);
        let (c, j) = (idx % p, idx / p);
        let (ks, vs) = self.rows.row(j);
        let per_column = self.mask.is_some();
        for a in 0..p {
            if !per_column && self.gram[a * p + c] == 0.0 {
                continue;
            }
            let g = &mut self.g[a * q..(a + 1) * q];
            for (&k, &s) in ks.iter().zip(vs) {
                g[k] -= delta * s * gram_entry(&self.gram, per_column, p, k, a, c);
            }
        }
    }

    fn reset(&mut self, beta: &[f64]) {
        let r = self.residual(beta);
        let g = self.pb.design().t().dot(&r);
        self.g.clear();
        self.g.extend(g.iter().copied());
    }

    fn residual_sq(&self, beta: &[f64]) -> f64 {
        self.residual(beta).iter().map(|v| v * v).sum()
    }
}

/// Coordinate-descent state that can be re-solved along a decreasing
/// sequence of penalties, each solve warm-started from the previous one.
pub struct LassoPath<D> {
    design: D,
    beta: Vec<f64>,
}

impl<D: CoordinateDesign> LassoPath<D> {
    pub fn new(design: D) -> Self {
        let beta = vec![0.0; design.n_coef()];
        LassoPath { design, beta }
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn set_beta(&mut self, beta: &[f64]) -> Result<()> {
        check_dim("warm start", self.beta.len(), beta.len())?;
        self.beta.copy_from_slice(beta);
        self.design.reset(beta);
        Ok(())
    }

    pub fn design(&self) -> &D {
        &self.design
    }

    fn sweep(&mut self, lambda: f64, coords: &[usize]) -> f64 {
        let half = 0.5 * lambda;
        let mut max_change = 0.0f64;
        for &j in coords {
            let nrm = self.design.norm_sq(j);
            if nrm <= 0.0 {
                // empty column: the coefficient is unidentified, keep it at zero
                self.beta[j] = 0.0;
                continue;
            }
            let old = self.beta[j];
            let z = self.design.grad(j) + nrm * old;
            let new = soft_threshold(z, half) / nrm;
            let delta = new - old;
            if delta != 0.0 {
                self.design.update(j, delta);
                self.beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Largest violation of the optimality conditions
    /// `2 A_j′ r = λ sign(β_j)` (β_j ≠ 0) and `|2 A_j′ r| ≤ λ` (β_j = 0).
    pub fn kkt_gap(&self, lambda: f64) -> f64 {
        (0..self.beta.len())
            .map(|j| kkt_violation(2.0 * self.design.grad(j), self.beta[j], lambda))
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, lambda: f64) -> f64 {
        self.design.residual_sq(&self.beta) + lambda * self.beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    pub fn solve(&mut self, lambda: f64, opts: &LassoOptions) -> Result<LassoSolution> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("penalty {lambda} must be finite and non-negative")));
        }
        let all: Vec<usize> = (0..self.beta.len()).collect();
        // gradients carry rounding proportional to their own size, so the
        // certificate cannot be tighter than that
        let grad_scale = all
            .iter()
            .map(|&j| self.design.grad(j).abs())
            .fold(0.0f64, f64::max);
        let kkt_tol = opts.kkt_tol.max(1e-11 * grad_scale);
        let mut trace = Vec::new();
        let mut sweeps = 0;
        let mut active = Vec::new();
        let mut last_change;
        let mut kkt = f64::INFINITY;
        loop {
            last_change = self.sweep(lambda, &all);
            sweeps += 1;
            if opts.record_objective {
                trace.push(self.objective(lambda));
            }
            if last_change <= opts.tol * self.scale() {
                kkt = self.kkt_gap(lambda);
                if kkt <= kkt_tol {
                    break;
                }
            }
            loop {
                if sweeps >= opts.max_sweeps {
                    return Err(Error::NonConvergence {
                        sweeps,
                        max_change: last_change,
                        kkt_gap: if kkt.is_finite() { kkt } else { self.kkt_gap(lambda) },
                    });
                }
                active.clear();
                active.extend((0..self.beta.len()).filter(|&j| self.beta[j] != 0.0));
                if active.is_empty() {
                    break;
                }
                last_change = self.sweep(lambda, &active);
                sweeps += 1;
                if opts.record_objective {
                    trace.push(self.objective(lambda));
                }
                if last_change <= opts.tol * self.scale() {
                    break;
                }
            }
        }
        Ok(LassoSolution {
            beta: Array1::from(self.beta.clone()),
            lambda,
            objective: self.objective(lambda),
            iterations: sweeps,
            kkt_gap: kkt,
            objective_trace: trace,
        })
    }

    fn scale(&self) -> f64 {
        self.beta.iter().fold(1.0f64, |m, b| m.max(b.abs()))
    }
}

pub(crate) fn kkt_violation(two_grad: f64, beta: f64, lambda: f64) -> f64 {
    if beta != 0.0 {
        (two_grad - lambda * beta.signum()).abs()
    } else {
        (two_grad.abs() - lambda).max(0.0)
    }
}

/// Solve the whitened vectorized Lasso on the full problem.
pub fn lasso_solve(
    pb: &VectorizedProblem,
    lambda: f64,
    warm_start: Option<ArrayView1<'_, f64>>,
    opts: &LassoOptions,
) -> Result<LassoSolution> {
    lasso_solve_masked(pb, None, lambda, warm_start, opts)
}

/// Solve using only the observations whose mask entry is set.
pub fn lasso_solve_masked(
    pb: &VectorizedProblem,
    mask: Option<&[bool]>,
    lambda: f64,
    warm_start: Option<ArrayView1<'_, f64>>,
    opts: &LassoOptions,
) -> Result<LassoSolution> {
    let mut path = LassoPath::new(KroneckerDesign::new(pb, mask)?);
    if let Some(w) = warm_start {
        path.set_beta(&w.to_vec())?;
    }
    path.solve(lambda, opts)
}

/// Solve against an explicit design matrix.
pub fn lasso_solve_dense(
    a: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    warm_start: Option<ArrayView1<'_, f64>>,
    opts: &LassoOptions,
) -> Result<LassoSolution> {
    let mut path = LassoPath::new(DenseDesign::new(a, y)?);
    if let Some(w) = warm_start {
        path.set_beta(&w.to_vec())?;
    }
    path.solve(lambda, opts)
}

/// Smallest penalty with an all-zero solution: `2 ‖A′ y‖∞`.
pub fn lambda_max(pb: &VectorizedProblem) -> f64 {
    lambda_max_masked(pb, None).expect("unmasked design is always valid")
}

pub fn lambda_max_masked(pb: &VectorizedProblem, mask: Option<&[bool]>) -> Result<f64> {
    let d = KroneckerDesign::new(pb, mask)?;
    Ok(2.0 * (0..d.n_coef()).map(|j| d.grad(j).abs()).fold(0.0, f64::max))
}

pub fn lambda_max_dense(a: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    2.0 * a.t().dot(&y).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::problem::vectorize_general;
    use crate::whitening::{ar1_inverse_sqrt, nonparam_inverse_sqrt, Autocovariance, WhiteningOperator};
    use ndarray::array;
    use rand::Rng;

    fn opts() -> LassoOptions {
        LassoOptions::default()
    }

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-1.0, 1.0), 0.0);
    }

    #[test]
    fn orthonormal_design_closed_form() {
        let a = Array2::<f64>::eye(2);
        let y = array![3.0, 0.5];
        let sol = lasso_solve_dense(a.view(), y.view(), 2.0, None, &opts()).unwrap();
        assert_eq!(sol.beta.to_vec(), vec![2.0, 0.0]);
        assert!(sol.kkt_gap <= 1e-6);
        assert!((sol.objective - (1.0 + 0.25 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn unpenalized_square_system() {
        let a = array![[2.0, 0.5, 0.0], [0.3, 1.5, 0.2], [0.0, -0.4, 1.0]];
        let x_true = array![1.0, -2.0, 0.5];
        let y = a.dot(&x_true);
        let sol = lasso_solve_dense(a.view(), y.view(), 0.0, None, &opts()).unwrap();
        for (b, t) in sol.beta.iter().zip(&x_true) {
            assert!((b - t).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_above_lambda_max() {
        let mut rng = crate::rng::rng_from(1);
        let a = Array2::from_shape_fn((20, 8), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(20, |_| rng.random_range(-1.0..1.0));
        let lmax = lambda_max_dense(a.view(), y.view());
        let sol = lasso_solve_dense(a.view(), y.view(), lmax, None, &opts()).unwrap();
        assert!(sol.beta.iter().all(|&b| b == 0.0));
        let sol = lasso_solve_dense(a.view(), y.view(), 0.9 * lmax, None, &opts()).unwrap();
        assert!(sol.beta.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn negative_penalty_rejected() {
        let a = Array2::<f64>::eye(2);
        let y = array![1.0, 1.0];
        assert!(lasso_solve_dense(a.view(), y.view(), -1.0, None, &opts()).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let mut rng = crate::rng::rng_from(2);
        let a = Array2::from_shape_fn((10, 10), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(10, |_| rng.random_range(-1.0..1.0));
        let o = LassoOptions { max_sweeps: 2, ..opts() };
        match lasso_solve_dense(a.view(), y.view(), 0.0, None, &o) {
            Err(Error::NonConvergence { sweeps, .. }) => assert_eq!(sweeps, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = crate::rng::rng_from(3);
        let a = Array2::from_shape_fn((30, 12), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(30, |_| rng.random_range(-2.0..2.0));
        let lmax = lambda_max_dense(a.view(), y.view());
        let o = LassoOptions { record_objective: true, ..opts() };
        let sol = lasso_solve_dense(a.view(), y.view(), 0.05 * lmax, None, &o).unwrap();
        assert!(sol.objective_trace.len() > 1);
        for w in sol.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn masked_kronecker_matches_dense_rows() {
        let mut rng = crate::rng::rng_from(4);
        let (n, p, q) = (6, 2, 5);
        let x = Array2::from_shape_fn((n, p), |(i, c)| ((i % p) == c) as u8 as f64);
        let y = Array2::from_shape_fn((n, q), |_| rng.random_range(-2.0..2.0));
        let gamma: Vec<f64> = (0..q).map(|h| 0.6f64.powi(h as i32)).collect();
        for s in [
            WhiteningOperator::identity(q),
            ar1_inverse_sqrt(0.6, q).unwrap(),
            nonparam_inverse_sqrt(&Autocovariance { gamma: gamma.clone() }).unwrap(),
        ] {
            let pb = vectorize_general(y.view(), x.view(), &s).unwrap();
            let mask: Vec<bool> = (0..n * q).map(|_| rng.random_bool(0.5)).collect();
            let dense = pb.materialize(1 << 20).unwrap();
            let rows: Vec<usize> = (0..n * q).filter(|&i| mask[i]).collect();
            let sub = dense.select(ndarray::Axis(0), &rows);
            let ysub = pb.response().select(ndarray::Axis(0), &rows);
            let lam = 0.2 * lambda_max_dense(sub.view(), ysub.view());
            assert!((lambda_max_masked(&pb, Some(&mask)).unwrap() - 5.0 * lam).abs() < 1e-10);
            let a = lasso_solve_masked(&pb, Some(&mask), lam, None, &opts()).unwrap();
            let b = lasso_solve_dense(sub.view(), ysub.view(), lam, None, &opts()).unwrap();
            for (u, v) in a.beta.iter().zip(&b.beta) {
                assert!((u - v).abs() < 1e-8, "{}", s.kind());
            }
            assert!((a.objective - b.objective).abs() < 1e-8 * b.objective.max(1.0));
        }
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let mut rng = crate::rng::rng_from(6);
        let a = Array2::from_shape_fn((25, 10), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(25, |_| rng.random_range(-1.0..1.0));
        let lam = 0.1 * lambda_max_dense(a.view(), y.view());
        let cold = lasso_solve_dense(a.view(), y.view(), lam, None, &opts()).unwrap();
        let start = Array1::from_elem(10, 0.3);
        let warm = lasso_solve_dense(a.view(), y.view(), lam, Some(start.view()), &opts()).unwrap();
        for (u, v) in cold.beta.iter().zip(&warm.beta) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn warm_start_on_column_hidden_by_mask_is_zeroed() {
        let x = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]];
        let y = array![[1.0, 2.0], [1.5, 2.5], [-1.0, 0.5], [-0.5, 1.0]];
        let pb = vectorize_general(y.view(), x.view(), &WhiteningOperator::identity(2)).unwrap();
        // Level 0 is never observed in response 0, so coefficient (0, 0) has no data.
        let mask = vec![false, false, true, true, true, true, true, true];
        let start = Array1::from_elem(4, 5.0);
        let sol = lasso_solve_masked(&pb, Some(&mask), 0.1, Some(start.view()), &opts()).unwrap();
        assert_eq!(sol.beta[pb.coef_index(0, 0)], 0.0);
        assert!(sol.kkt_gap <= 1e-6);
    }
}

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{check_dim, Error, Result};
use crate::linmodel::DesignMatrix;
use crate::whitening::{apply_whitening, WhiteningOperator};

/// Default cap on the size of an explicitly materialized Kronecker design.
pub const DEFAULT_MATERIALIZE_BUDGET: usize = 256 << 20;

/// Whitened, vectorized regression `vec(Y S) = (S′ ⊗ X) vec(B) + noise`.
///
/// The response is stored column-stacked: element `(i, k)` of the whitened
/// n×q matrix sits at `i + k·n`. Coefficient `(c, j)` of the p×q matrix sits
/// at `c + j·p`. The design is never formed unless asked for.
#[derive(Debug, Clone)]
pub struct VectorizedProblem {
    response: Array1<f64>,
    whitened: Array2<f64>,
    x: Array2<f64>,
    op: WhiteningOperator,
    rows: SparseRows,
}

/// Nonzeros of the whitening operator, row by row (CSR).
#[derive(Debug, Clone)]
pub(crate) struct SparseRows {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl SparseRows {
    fn from_operator(op: &WhiteningOperator) -> Self {
        let mut ptr = Vec::with_capacity(op.q() + 1);
        let mut idx = Vec::new();
        let mut val = Vec::new();
        ptr.push(0);
        for j in 0..op.q() {
            for (k, v) in op.row_entries(j) {
                idx.push(k);
                val.push(v);
            }
            ptr.push(idx.len());
        }
        SparseRows { ptr, idx, val }
    }

    #[inline]
    pub(crate) fn row(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.ptr[j], self.ptr[j + 1]);
        (&self.idx[a..b], &self.val[a..b])
    }
}

impl VectorizedProblem {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.op.q()
    }

    /// Length of the vectorized response, `n·q`.
    pub fn n_obs(&self) -> usize {
        self.n() * self.q()
    }

    /// Number of coefficients, `p·q`.
    pub fn n_coef(&self) -> usize {
        self.p() * self.q()
    }

    pub fn response(&self) -> ArrayView1<'_, f64> {
        self.response.view()
    }

    /// The whitened response as an n×q matrix.
    pub fn whitened(&self) -> ArrayView2<'_, f64> {
        self.whitened.view()
    }

    pub fn design(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn operator(&self) -> &WhiteningOperator {
        &self.op
    }

    pub(crate) fn sparse_rows(&self) -> &SparseRows {
        &self.rows
    }

    pub fn coef_index(&self, level: usize, response: usize) -> usize {
        level + response * self.p()
    }

    /// Squared norms of the design columns, `‖X_c‖² · ‖S_j·‖²`.
    pub fn column_norms_sq(&self) -> Array1<f64> {
        let (p, q) = (self.p(), self.q());
        let xn: Vec<f64> = self.x.columns().into_iter().map(|c| c.dot(&c)).collect();
        let mut out = Array1::zeros(p * q);
        for j in 0..q {
            let sn: f64 = self.op.row_entries(j).iter().map(|(_, v)| v * v).sum();
            for c in 0..p {
                out[c + j * p] = xn[c] * sn;
            }
        }
        out
    }

    /// Dense `S′ ⊗ X` (nq × pq). Fails when it would exceed `budget` bytes.
    pub fn materialize(&self, budget: usize) -> Result<Array2<f64>> {
        let (n, p, q) = (self.n(), self.p(), self.q());
        let bytes = (n * q)
            .checked_mul(p * q)
            .and_then(|v| v.checked_mul(8))
            .unwrap_or(usize::MAX);
        if bytes > budget {
            return Err(Error::invalid(format!(
                "materialized design needs {bytes} bytes, budget is {budget}"
            )));
        }
        let mut a = Array2::zeros((n * q, p * q));
        for j in 0..q {
            for (k, s) in self.op.row_entries(j) {
                for c in 0..p {
                    for i in 0..n {
                        a[[i + k * n, c + j * p]] = s * self.x[[i, c]];
                    }
                }
            }
        }
        Ok(a)
    }
}

/// Column-stack an n×q matrix.
pub fn vec_columns(m: ArrayView2<'_, f64>) -> Array1<f64> {
    m.t().iter().copied().collect()
}

/// Inverse of [`vec_columns`].
pub fn unvec_columns(v: ArrayView1<'_, f64>, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| v[i + j * rows])
}

/// Builds the vectorized problem from an already whitened response `Y S`.
pub fn vectorize(yw: ArrayView2<'_, f64>, x: &DesignMatrix, s: &WhiteningOperator) -> Result<VectorizedProblem> {
    vectorize_general(yw, x.values.view(), s)
}

/// As [`vectorize`] for an arbitrary n×p design.
pub fn vectorize_general(
    yw: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    s: &WhiteningOperator,
) -> Result<VectorizedProblem> {
    check_dim("rows of whitened Y vs design", x.nrows(), yw.nrows())?;
    check_dim("columns of whitened Y vs operator", s.q(), yw.ncols())?;
    Ok(VectorizedProblem {
        response: vec_columns(yw),
        whitened: yw.to_owned(),
        x: x.to_owned(),
        op: s.clone(),
        rows: SparseRows::from_operator(s),
    })
}

/// `(S′ ⊗ X) v` computed as `vec(X V S)` with `V` the p×q reshaping of `v`.
pub fn kronecker_matvec(problem: &VectorizedProblem, v: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    check_dim("coefficient vector", problem.n_coef(), v.len())?;
    let b = unvec_columns(v, problem.p(), problem.q());
    let xb = problem.x.dot(&b);
    let m = apply_whitening(xb.view(), &problem.op)?;
    Ok(vec_columns(m.view()))
}

/// `(S′ ⊗ X)′ r = vec(X′ R S′)`.
pub fn kronecker_rmatvec(problem: &VectorizedProblem, r: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    check_dim("observation vector", problem.n_obs(), r.len())?;
    let rm = unvec_columns(r, problem.n(), problem.q());
    let g = problem.x.t().dot(&rm);
    let (p, q) = (problem.p(), problem.q());
    let mut out = Array1::zeros(p * q);
    for j in 0..q {
        for (k, s) in problem.op.row_entries(j) {
            for c in 0..p {
                out[c + j * p] += s * g[[c, k]];
            }
        }
    }
    Ok(out)
}

/// p×q coefficient matrix from its vectorization.
pub fn coefficient_matrix(beta: ArrayView1<'_, f64>, p: usize, q: usize) -> Array2<f64> {
    unvec_columns(beta, p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::{build_design, FactorLabels};
    use crate::whitening::{ar1_inverse_sqrt, nonparam_inverse_sqrt, Autocovariance};
    use ndarray::array;
    use rand::Rng;

    /// Explicit Kronecker product, written out from its definition.
    fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        let (ar, ac) = a.dim();
        let (br, bc) = b.dim();
        Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
    }

    fn random_problem(n: usize, p: usize, q: usize, seed: u64) -> VectorizedProblem {
        let mut rng = crate::rng::rng_from(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((n, q), |_| rng.random_range(-1.0..1.0));
        let gamma: Vec<f64> = (0..q).map(|h| 0.5f64.powi(h as i32) + if h == 0 { 0.2 } else { 0.0 }).collect();
        let s = nonparam_inverse_sqrt(&Autocovariance { gamma }).unwrap();
        vectorize_general(y.view(), x.view(), &s).unwrap()
    }

    fn max_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn column_stacking() {
        let y = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(vec_columns(y.view()).to_vec(), vec![1.0, 3.0, 2.0, 4.0]);
        let back = unvec_columns(vec_columns(y.view()).view(), 2, 2);
        assert_eq!(back, y);
    }

    #[test]
    fn identity_operator_gives_block_diagonal_design() {
        let x = build_design(&FactorLabels::new(&["a", "b", "a"]).unwrap()).unwrap();
        let y = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let pb = vectorize(y.view(), &x, &WhiteningOperator::identity(2)).unwrap();
        assert_eq!(pb.response().to_vec(), vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        let dense = pb.materialize(1 << 20).unwrap();
        assert_eq!(dense, kron(&Array2::eye(2), &x.values));
    }

    #[test]
    fn matvec_matches_explicit_kronecker() {
        for (n, p, q, seed) in [(3, 2, 4, 1), (4, 3, 2, 2), (1, 1, 1, 3), (5, 3, 6, 4)] {
            let pb = random_problem(n, p, q, seed);
            let dense = kron(&pb.operator().matrix().t().to_owned(), &pb.design().to_owned());
            assert_eq!(pb.materialize(1 << 20).unwrap(), dense);
            let mut rng = crate::rng::rng_from(seed + 10);
            let v = Array1::from_shape_fn(p * q, |_| rng.random_range(-2.0..2.0));
            let fast = kronecker_matvec(&pb, v.view()).unwrap();
            assert!(max_diff(&fast, &dense.dot(&v)) < 1e-12);
            let r = Array1::from_shape_fn(n * q, |_| rng.random_range(-2.0..2.0));
            let fast_t = kronecker_rmatvec(&pb, r.view()).unwrap();
            assert!(max_diff(&fast_t, &dense.t().dot(&r)) < 1e-12);
            let norms = pb.column_norms_sq();
            let want = Array1::from_iter(dense.columns().into_iter().map(|c| c.dot(&c)));
            assert!(max_diff(&norms, &want) < 1e-12);
        }
    }

    #[test]
    fn matvec_trivial_cases() {
        let pb = random_problem(4, 3, 2, 9);
        let z = kronecker_matvec(&pb, Array1::zeros(6).view()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let x = array![[2.0]];
        let s = ar1_inverse_sqrt(0.6, 1).unwrap();
        let pb = vectorize_general(array![[1.0]].view(), x.view(), &s).unwrap();
        let out = kronecker_matvec(&pb, array![3.0].view()).unwrap();
        assert!((out[0] - 0.8 * 2.0 * 3.0).abs() < 1e-15);
        assert!(kronecker_matvec(&pb, array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn materialize_respects_budget() {
        let pb = random_problem(3, 2, 4, 5);
        assert!(pb.materialize(10).is_err());
    }
}

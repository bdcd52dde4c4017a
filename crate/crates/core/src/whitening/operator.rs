use ndarray::{Array2, ArrayView2};

use super::autocov::Autocovariance;
use crate::error::{check_dim, Error, Result};

/// Relative ridge added to γ̂(0) when the Toeplitz estimate is numerically
/// singular.
pub const RIDGE_DELTA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhiteningKind {
    Identity,
    Ar1,
    #[serde(rename = "nonparam")]
    Nonparametric,
}

impl WhiteningKind {
    pub const ALL: [WhiteningKind; 3] = [
        WhiteningKind::Identity,
        WhiteningKind::Ar1,
        WhiteningKind::Nonparametric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WhiteningKind::Identity => "identity",
            WhiteningKind::Ar1 => "ar1",
            WhiteningKind::Nonparametric => "nonparam",
        }
    }
}

impl std::fmt::Display for WhiteningKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Identity,
    Ar1 { phi1: f64 },
    /// Dense upper-triangular matrix.
    Upper(Array2<f64>),
}

/// The q×q matrix `S` with `S′ Σ̂ S = I`, applied on the right of an n×q
/// matrix. AR(1) operators are upper bidiagonal, nonparametric ones upper
/// triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningOperator {
    kind: WhiteningKind,
    q: usize,
    repr: Repr,
    /// Ridge added to γ̂(0) before factorization, if any.
    pub regularization: Option<f64>,
}

impl WhiteningOperator {
    pub fn identity(q: usize) -> Self {
        WhiteningOperator {
            kind: WhiteningKind::Identity,
            q,
            repr: Repr::Identity,
            regularization: None,
        }
    }

    /// Wrap an explicit upper-triangular operator.
    pub fn from_upper(s: Array2<f64>) -> Result<Self> {
        let q = s.nrows();
        check_dim("operator columns", q, s.ncols())?;
        for j in 0..q {
            for k in 0..j {
                if s[[j, k]] != 0.0 {
                    return Err(Error::invalid("operator is not upper triangular"));
                }
            }
        }
        Ok(WhiteningOperator {
            kind: WhiteningKind::Nonparametric,
            q,
            repr: Repr::Upper(s),
            regularization: None,
        })
    }

    pub fn kind(&self) -> WhiteningKind {
        self.kind
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// AR(1) coefficient for `ar1` operators.
    pub fn phi1(&self) -> Option<f64> {
        match self.repr {
            Repr::Ar1 { phi1 } => Some(phi1),
            _ => None,
        }
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        match &self.repr {
            Repr::Identity => (j == k) as u8 as f64,
            Repr::Ar1 { phi1 } => {
                if j == k {
                    if j == 0 {
                        (1.0 - phi1 * phi1).sqrt()
                    } else {
                        1.0
                    }
                } else if k == j + 1 {
                    -phi1
                } else {
                    0.0
                }
            }
            Repr::Upper(s) => s[[j, k]],
        }
    }

    /// Nonzero entries `(k, S[j, k])` of row `j`.
    pub fn row_entries(&self, j: usize) -> Vec<(usize, f64)> {
        match &self.repr {
            Repr::Identity => vec![(j, 1.0)],
            Repr::Ar1 { phi1 } => {
                let d = if j == 0 { (1.0 - phi1 * phi1).sqrt() } else { 1.0 };
                let mut out = vec![(j, d)];
                if j + 1 < self.q && *phi1 != 0.0 {
                    out.push((j + 1, -phi1));
                }
                out
            }
            Repr::Upper(s) => (j..self.q)
                .map(|k| (k, s[[j, k]]))
                .filter(|&(_, v)| v != 0.0)
                .collect(),
        }
    }

    /// Dense q×q matrix.
    pub fn matrix(&self) -> Array2<f64> {
        match &self.repr {
            Repr::Upper(s) => s.clone(),
            _ => Array2::from_shape_fn((self.q, self.q), |(j, k)| self.get(j, k)),
        }
    }
}

/// Closed-form inverse square root of the AR(1) covariance: upper bidiagonal
/// with √(1−φ²) in the corner, ones on the rest of the diagonal and −φ on the
/// superdiagonal.
pub fn ar1_inverse_sqrt(phi1: f64, q: usize) -> Result<WhiteningOperator> {
    if !(phi1.abs() < 1.0) {
        return Err(Error::invalid(format!("AR(1) coefficient {phi1} is outside (-1, 1)")));
    }
    if q == 0 {
        return Err(Error::invalid("operator dimension must be positive"));
    }
    Ok(WhiteningOperator {
        kind: WhiteningKind::Ar1,
        q,
        repr: Repr::Ar1 { phi1 },
        regularization: None,
    })
}

/// Inverse Cholesky factor of the Toeplitz matrix built from `gamma`, returned
/// transposed so that `S′ Σ̂ S = I`.
///
/// The Durbin recursion produces the unit lower-triangular `A` and the
/// prediction-error variances `v` with `A Σ̂ A′ = diag(v)`; then
/// `L⁻¹ = diag(v)^(-1/2) A`. If a prediction variance collapses the matrix is
/// retried once with `RIDGE_DELTA · γ̂(0)` added to the diagonal.
pub fn nonparam_inverse_sqrt(gamma: &Autocovariance) -> Result<WhiteningOperator> {
    match toeplitz_inverse_cholesky(&gamma.gamma) {
        Ok(s) => Ok(WhiteningOperator {
            kind: WhiteningKind::Nonparametric,
            q: s.nrows(),
            repr: Repr::Upper(s),
            regularization: None,
        }),
        Err(Error::NotPositiveDefinite { pivot }) => {
            let ridge = RIDGE_DELTA * gamma.gamma[0];
            log::warn!("Toeplitz factorization failed at pivot {pivot}; retrying with ridge {ridge:.3e}");
            let mut g = gamma.gamma.clone();
            g[0] += ridge;
            let s = toeplitz_inverse_cholesky(&g)?;
            Ok(WhiteningOperator {
                kind: WhiteningKind::Nonparametric,
                q: s.nrows(),
                repr: Repr::Upper(s),
                regularization: Some(ridge),
            })
        }
        Err(e) => Err(e),
    }
}

/// `(L⁻¹)′` for the Toeplitz matrix with first row `r`, without the ridge retry.
pub fn toeplitz_inverse_cholesky(r: &[f64]) -> Result<Array2<f64>> {
    let q = r.len();
    if q == 0 {
        return Err(Error::invalid("empty autocovariance"));
    }
    // pivots below this fraction of γ(0) are treated as numerically singular
    let floor = r[0].abs() * 1e-13;
    if !(r[0] > 0.0) || !r[0].is_finite() {
        return Err(Error::NotPositiveDefinite { pivot: 0 });
    }
    let mut s = Array2::<f64>::zeros((q, q));
    s[[0, 0]] = 1.0 / r[0].sqrt();
    let mut a: Vec<f64> = Vec::with_capacity(q);
    let mut prev: Vec<f64> = Vec::with_capacity(q);
    let mut v = r[0];
    for m in 1..q {
        let mut acc = r[m];
        for (j, aj) in a.iter().enumerate() {
            acc -= aj * r[m - 1 - j];
        }
        let k = acc / v;
        prev.clear();
        prev.extend_from_slice(&a);
        for j in 0..prev.len() {
            a[j] = prev[j] - k * prev[prev.len() - 1 - j];
        }
        a.push(k);
        v *= 1.0 - k * k;
        if !(v > floor) || !v.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: m });
        }
        // row m of A: A[m, m] = 1, A[m, m-1-j] = -a[j]; S = (diag(v)^-1/2 A)'
        let scale = 1.0 / v.sqrt();
        s[[m, m]] = scale;
        for (j, aj) in a.iter().enumerate() {
            s[[m - 1 - j, m]] = -aj * scale;
        }
    }
    Ok(s)
}

/// `M · S`, using the operator's structure.
pub fn apply_whitening(m: ArrayView2<'_, f64>, s: &WhiteningOperator) -> Result<Array2<f64>> {
    check_dim("columns vs whitening operator", s.q(), m.ncols())?;
    let (n, q) = m.dim();
    match &s.repr {
        Repr::Identity => Ok(m.to_owned()),
        Repr::Ar1 { phi1 } => {
            let mut out = Array2::zeros((n, q));
            let d0 = (1.0 - phi1 * phi1).sqrt();
            for i in 0..n {
                out[[i, 0]] = d0 * m[[i, 0]];
                for k in 1..q {
                    out[[i, k]] = m[[i, k]] - phi1 * m[[i, k - 1]];
                }
            }
            Ok(out)
        }
        Repr::Upper(u) => {
            let mut out = Array2::zeros((n, q));
            for i in 0..n {
                let mut orow = out.row_mut(i);
                let orow = orow.as_slice_mut().expect("standard layout");
                for j in 0..q {
                    let mij = m[[i, j]];
                    if mij == 0.0 {
                        continue;
                    }
                    let srow = u.row(j);
                    let srow = srow.as_slice().expect("standard layout");
                    for k in j..q {
                        orow[k] += mij * srow[k];
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Exact AR(1) covariance `φ^|j−k| / (1 − φ²)` with unit innovation variance.
pub fn ar1_covariance(phi1: f64, q: usize) -> Array2<f64> {
    let c = 1.0 / (1.0 - phi1 * phi1);
    Array2::from_shape_fn((q, q), |(j, k)| c * phi1.powi((j as i32 - k as i32).abs()))
}

/// Dense symmetric Toeplitz matrix with first row `r`.
pub fn toeplitz(r: &[f64]) -> Array2<f64> {
    let q = r.len();
    Array2::from_shape_fn((q, q), |(j, k)| r[j.abs_diff(k)])
}

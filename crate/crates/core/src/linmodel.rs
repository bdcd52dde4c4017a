//! One-way multivariate linear model: factor labels, indicator design,
//! column standardization and the per-column ANOVA fit.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};

/// Categorical condition of each sample together with the distinct levels in
/// first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorLabels {
    labels: Vec<String>,
    levels: Vec<String>,
    codes: Vec<usize>,
}

impl FactorLabels {
    /// Levels are ordered by first appearance in `labels`.
    pub fn new<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("empty label sequence"));
        }
        let mut levels: Vec<String> = Vec::new();
        let mut codes = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            let code = match levels.iter().position(|x| x == l) {
                Some(c) => c,
                None => {
                    levels.push(l.to_string());
                    levels.len() - 1
                }
            };
            codes.push(code);
        }
        Ok(FactorLabels {
            labels: labels.iter().map(|s| s.as_ref().to_string()).collect(),
            levels,
            codes,
        })
    }

    /// Explicit level order. Every level must have at least one replicate
    /// and every label must be a declared level.
    pub fn with_levels<S: AsRef<str>, T: AsRef<str>>(labels: &[S], levels: &[T]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("empty label sequence"));
        }
        let levels: Vec<String> = levels.iter().map(|s| s.as_ref().to_string()).collect();
        let mut codes = Vec::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            let c = levels
                .iter()
                .position(|x| x == l.as_ref())
                .ok_or_else(|| Error::invalid(format!("label {:?} at row {i} is not a level", l.as_ref())))?;
            codes.push(c);
        }
        let out = FactorLabels {
            labels: labels.iter().map(|s| s.as_ref().to_string()).collect(),
            levels,
            codes,
        };
        if let Some(c) = out.counts().iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!("level {:?} has no replicates", out.levels[c])));
        }
        Ok(out)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    /// Level index of each sample.
    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Replicate count per level.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.levels.len()];
        for &c in &self.codes {
            counts[c] += 1;
        }
        counts
    }
}

/// Centered (optionally scaled) n×q response matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub values: Array2<f64>,
    /// Columns that were constant and therefore only centered.
    pub constant_columns: Vec<usize>,
    pub scaled: bool,
}

impl ObservationMatrix {
    /// Wrap data that is used as-is, without standardization.
    pub fn raw(values: Array2<f64>) -> Self {
        ObservationMatrix {
            values,
            constant_columns: Vec::new(),
            scaled: false,
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn q(&self) -> usize {
        self.values.ncols()
    }
}

/// n×p matrix of 0/1 level indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: Array2<f64>,
    codes: Vec<usize>,
    counts: Vec<usize>,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    /// Level index of each row.
    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    /// Column sums, i.e. replicates per level.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Rebuild from an explicit indicator matrix, validating that every row
    /// has a single unit entry.
    pub fn from_indicators(values: Array2<f64>) -> Result<Self> {
        let p = values.ncols();
        let mut codes = Vec::with_capacity(values.nrows());
        for (i, row) in values.rows().into_iter().enumerate() {
            let ones: Vec<usize> = (0..p).filter(|&c| row[c] == 1.0).collect();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones.len() != 1 || zeros != p - 1 {
                return Err(Error::invalid(format!("design row {i} is not a level indicator")));
            }
            codes.push(ones[0]);
        }
        let mut counts = vec![0; p];
        for &c in &codes {
            counts[c] += 1;
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::Numerical(format!(
                "design is rank deficient: column {c} has no samples"
            )));
        }
        Ok(DesignMatrix { values, codes, counts })
    }
}

/// p×q coefficient matrix, one row per level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub values: Array2<f64>,
}

/// n×q residual matrix `Y − X B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    pub values: Array2<f64>,
}

impl ResidualMatrix {
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
}

pub fn build_design(labels: &FactorLabels) -> Result<DesignMatrix> {
    let n = labels.n();
    let p = labels.n_levels();
    if n == 0 || p == 0 {
        return Err(Error::invalid("empty label sequence"));
    }
    let counts = labels.counts();
    if let Some(c) = counts.iter().position(|&k| k == 0) {
        return Err(Error::invalid(format!(
            "level {:?} has no replicates",
            labels.levels()[c]
        )));
    }
    let mut values = Array2::zeros((n, p));
    for (i, &c) in labels.codes().iter().enumerate() {
        values[[i, c]] = 1.0;
    }
    Ok(DesignMatrix {
        values,
        codes: labels.codes().to_vec(),
        counts,
    })
}

/// Center every column and, if `scale` is set, divide it by its sample
/// standard deviation (n − 1 divisor). Constant columns are centered only and
/// reported in `constant_columns`.
pub fn standardize(y: ArrayView2<'_, f64>, scale: bool) -> Result<ObservationMatrix> {
    let n = y.nrows();
    if scale && n < 2 {
        return Err(Error::invalid("scaling needs at least two samples"));
    }
    let mut values = y.to_owned();
    let mut constant_columns = Vec::new();
    for (j, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let ss: f64 = col.iter().map(|v| v * v).sum();
        // Relative to the column magnitude so that e.g. (5,5,5) counts as
        // constant after rounding in the mean.
        let mag = mean.abs().max(1.0);
        if ss.sqrt() <= 1e-12 * mag * (n as f64).sqrt() {
            col.fill(0.0);
            constant_columns.push(j);
            continue;
        }
        if scale {
            let sd = (ss / (n - 1) as f64).sqrt();
            col.mapv_inplace(|v| v / sd);
        }
    }
    Ok(ObservationMatrix {
        values,
        constant_columns,
        scaled: scale,
    })
}

/// Per-column one-way ANOVA. Coefficients are the level means, residuals are
/// deviations from them.
pub fn fit_anova(y: &ObservationMatrix, x: &DesignMatrix) -> Result<(CoefficientMatrix, ResidualMatrix)> {
    fit_group_means(y.values.view(), x)
}

pub(crate) fn fit_group_means(
    y: ArrayView2<'_, f64>,
    x: &DesignMatrix,
) -> Result<(CoefficientMatrix, ResidualMatrix)> {
    check_dim("rows of Y vs design", x.n(), y.nrows())?;
    if let Some(c) = x.counts().iter().position(|&k| k == 0) {
        return Err(Error::Numerical(format!(
            "design is rank deficient: level {c} has no samples"
        )));
    }
    let (p, q) = (x.p(), y.ncols());
    let mut b = Array2::<f64>::zeros((p, q));
    for (i, &c) in x.codes().iter().enumerate() {
        let mut row = b.row_mut(c);
        row += &y.row(i);
    }
    for (c, &k) in x.counts().iter().enumerate() {
        b.row_mut(c).mapv_inplace(|v| v / k as f64);
    }
    let mut e = y.to_owned();
    for (i, &c) in x.codes().iter().enumerate() {
        let mut row = e.row_mut(i);
        row -= &b.row(c);
    }
    Ok((CoefficientMatrix { values: b }, ResidualMatrix { values: e }))
}

/// Residuals of the ANOVA fit restricted to a support: coefficient (c, j) is
/// the level mean when `support[c, j]` is set and zero otherwise.
pub fn refit_on_support(y: ArrayView2<'_, f64>, x: &DesignMatrix, support: &Array2<bool>) -> Result<ResidualMatrix> {
    check_dim("support rows", x.p(), support.nrows())?;
    check_dim("support columns", y.ncols(), support.ncols())?;
    let (b, _) = fit_group_means(y, x)?;
    let mut e = y.to_owned();
    for (i, &c) in x.codes().iter().enumerate() {
        for j in 0..y.ncols() {
            if support[[c, j]] {
                e[[i, j]] -= b.values[[c, j]];
            }
        }
    }
    Ok(ResidualMatrix { values: e })
}

/// Column means, used by tests and diagnostics.
pub fn column_means(y: ArrayView2<'_, f64>) -> Array1<f64> {
    y.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(y.ncols()))
}

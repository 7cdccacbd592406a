use nalgebra::DMatrix;

use crate::ensemble::WeightVector;
use crate::error::{ensure_dims, Error, Result};

/// Pairwise squared Euclidean distances between ensemble members.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(DMatrix<f64>);

impl CostMatrix {
    /// `D_ij = ||v_i - v_j||^2` for the columns of `members`.
    pub fn squared_euclidean(members: &DMatrix<f64>) -> Self {
        let size = members.ncols();
        let mut d = DMatrix::zeros(size, size);
        for j in 0..size {
            let vj = members.column(j);
            for i in 0..j {
                let vi = members.column(i);
                let dist: f64 = vi.iter().zip(vj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                d[(i, j)] = dist;
                d[(j, i)] = dist;
            }
        }
        Self(d)
    }

    /// `D_ij = (x_i - x_j)^2` for scalar values.
    pub fn squared_scalar(values: &[f64]) -> Self {
        let size = values.len();
        Self(DMatrix::from_fn(size, size, |i, j| {
            let d = values[i] - values[j];
            d * d
        }))
    }

    /// Arbitrary square, finite, nonnegative cost.
    pub fn from_matrix(d: DMatrix<f64>) -> Result<Self> {
        ensure_dims(d.is_square(), || format!("cost matrix is {}x{}", d.nrows(), d.ncols()))?;
        if d.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("cost entries must be finite and nonnegative".into()));
        }
        Ok(Self(d))
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

impl std::ops::Add<&CostMatrix> for &CostMatrix {
    type Output = CostMatrix;
    fn add(self, rhs: &CostMatrix) -> CostMatrix {
        CostMatrix(&self.0 + &rhs.0)
    }
}

/// Coupling `S` between sources weighted by `w` (rows) and uniform targets
/// (columns): `Σ_j s_ij = w_i`, `Σ_i s_ij = 1/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: DMatrix<f64>,
    row_marginal: Vec<f64>,
}

impl TransportPlan {
    pub(crate) fn from_parts(entries: DMatrix<f64>, row_marginal: Vec<f64>) -> Self {
        Self { entries, row_marginal }
    }

    /// Wraps a user-supplied coupling after checking its marginals to `tol`.
    pub fn new(entries: DMatrix<f64>, w: &WeightVector, tol: f64) -> Result<Self> {
        let plan = Self { entries, row_marginal: w.as_slice().to_vec() };
        ensure_dims(plan.entries.is_square() && plan.entries.nrows() == w.len(), || {
            format!("plan is {}x{} for {} weights", plan.entries.nrows(), plan.entries.ncols(), w.len())
        })?;
        let err = plan.marginal_error();
        if err > tol || plan.entries.iter().any(|x| *x < 0.0) {
            return Err(Error::InfeasibleMarginals(format!("marginal error {err:e}")));
        }
        Ok(plan)
    }

    pub fn identity(size: usize) -> Self {
        let m = size as f64;
        Self {
            entries: DMatrix::from_diagonal_element(size, size, 1.0 / m),
            row_marginal: vec![1.0 / m; size],
        }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.entries.component_mul(cost.matrix()).sum()
    }

    /// Largest absolute deviation of either marginal from its target.
    pub fn marginal_error(&self) -> f64 {
        let size = self.size();
        let target_col = 1.0 / size as f64;
        let mut err: f64 = 0.0;
        for (i, row) in self.entries.row_iter().enumerate() {
            err = err.max((row.sum() - self.row_marginal[i]).abs());
        }
        for col in self.entries.column_iter() {
            err = err.max((col.sum() - target_col).abs());
        }
        err
    }

    /// CSV dump, one row per source.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.entries.row_iter() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Deterministic ensemble transform `ṽ_j = M Σ_i v_i s_ij`.
///
/// `members` holds one member per column. The column mean of the output is
/// the `w`-weighted mean of the input.
pub fn transform(members: &DMatrix<f64>, plan: &TransportPlan) -> Result<DMatrix<f64>> {
    ensure_dims(members.ncols() == plan.size(), || {
        format!("{} members but plan of size {}", members.ncols(), plan.size())
    })?;
    Ok(members * plan.entries() * plan.size() as f64)
}

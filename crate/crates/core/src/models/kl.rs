//! Karhunen–Loève parameterization of Gaussian log-permeability fields.


use nalgebra::{DMatrix, DVector};

use super::bessel::matern_correlation;
use crate::error::{ensure_dims, Error, Result};
use crate::grid::GridSpec;

/// Dense Whittle–Matérn correlation between all pairs of cell centers.
pub fn whittle_matern_cov(grid: &GridSpec, delta: f64) -> Result<DMatrix<f64>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("correlation length must be positive, got {delta}")));
    }
    let n = grid.n;
    let cells = grid.num_cells();
    let dx = grid.dx();
    // on a uniform grid the correlation depends only on |di|, |dj|
    let mut table = vec![0.0; n * n];
    for dj in 0..n {
        for di in 0..n {
            let d = dx * ((di * di + dj * dj) as f64).sqrt();
            table[di + n * dj] = matern_correlation(d, delta);
        }
    }
    Ok(DMatrix::from_fn(cells, cells, |a, b| {
        let (ia, ja) = grid.ij(a);
        let (ib, jb) = grid.ij(b);
        table[ia.abs_diff(ib) + n * ja.abs_diff(jb)]
    }))
}

/// Linear map between a parameter vector and a grid field.
pub trait FieldMap: Sync {
    fn num_params(&self) -> usize;
    fn num_cells(&self) -> usize;
    /// Field from parameters for a block of members (`n x M -> N^2 x M`).
    fn to_field(&self, params: &DMatrix<f64>) -> DMatrix<f64>;
    /// Least-squares inverse of [`FieldMap::to_field`] (`N^2 x M -> n x M`).
    fn from_field(&self, field: &DMatrix<f64>) -> DMatrix<f64>;
}

/// `log k = mean + γ diag(√λ) u` with the leading `m_kl` eigenpairs of the
/// correlation matrix.
#[derive(Debug, Clone)]
pub struct KlBasis {
    pub grid: GridSpec,
    pub delta: f64,
    /// Descending, clipped at zero.
    pub eigenvalues: Vec<f64>,
    /// `N^2 x m_kl`, orthonormal columns.
    pub eigenvectors: DMatrix<f64>,
    pub mean_log_k: f64,
    map: DMatrix<f64>,
}

pub fn build_kl_basis(grid: &GridSpec, delta: f64, m_kl: usize) -> Result<KlBasis> {
    let cells = grid.num_cells();
    if m_kl == 0 || m_kl > cells {
        return Err(Error::InvalidInput(format!("m_kl = {m_kl} outside 1..={cells}")));
    }
    let cov = whittle_matern_cov(grid, delta)?;
    let mat = faer::Mat::<f64>::from_fn(cells, cells, |i, j| cov[(i, j)]);
    let evd = mat
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Model(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..cells).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let order = &order[..m_kl];
    let eigenvalues: Vec<f64> = order.iter().map(|&k| s[k].max(0.0)).collect();
    let mut eigenvectors = DMatrix::from_fn(cells, m_kl, |i, c| u[(i, order[c])]);
    // fix the sign so the largest-magnitude entry of each mode is positive
    for mut col in eigenvectors.column_iter_mut() {
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    let sqrt_l = DVector::from_iterator(m_kl, eigenvalues.iter().map(|l| l.sqrt()));
    let map = &eigenvectors * DMatrix::from_diagonal(&sqrt_l);
    Ok(KlBasis { grid: *grid, delta, eigenvalues, eigenvectors, mean_log_k: 5f64.ln(), map })
}

impl KlBasis {
    pub fn m_kl(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The matrix `γ diag(√λ)`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.map
    }

    /// `log k^l = log 5 + Σ √λ_ℓ γ^{ℓ l} u_ℓ`.
    pub fn sample_log_permeability(&self, u: &[f64]) -> Result<Vec<f64>> {
        ensure_dims(u.len() == self.m_kl(), || format!("{} coefficients for {} modes", u.len(), self.m_kl()))?;
        let field = &self.map * DVector::from_column_slice(u);
        Ok(field.iter().map(|x| x + self.mean_log_k).collect())
    }

    /// Coefficients of a field on the retained modes; exact inverse on the
    /// range of the map.
    pub fn coefficients(&self, log_k: &[f64]) -> Result<Vec<f64>> {
        ensure_dims(log_k.len() == self.grid.num_cells(), || {
            format!("field has {} cells, grid {}", log_k.len(), self.grid.num_cells())
        })?;
        let centered = DVector::from_iterator(log_k.len(), log_k.iter().map(|x| x - self.mean_log_k));
        let proj = self.eigenvectors.tr_mul(&centered);
        Ok(proj
            .iter()
            .zip(&self.eigenvalues)
            .map(|(p, l)| if *l > 0.0 { p / l.sqrt() } else { 0.0 })
            .collect())
    }
}

impl FieldMap for KlBasis {
    fn num_params(&self) -> usize {
        self.m_kl()
    }

    fn num_cells(&self) -> usize {
        self.grid.num_cells()
    }

    fn to_field(&self, params: &DMatrix<f64>) -> DMatrix<f64> {
        let mut f = &self.map * params;
        f.add_scalar_mut(self.mean_log_k);
        f
    }

    fn from_field(&self, field: &DMatrix<f64>) -> DMatrix<f64> {
        let centered = field.add_scalar(-self.mean_log_k);
        let mut proj = self.eigenvectors.tr_mul(&centered);
        for (k, mut row) in proj.row_iter_mut().enumerate() {
            let l = self.eigenvalues[k];
            let scale = if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 };
            row *= scale;
        }
        proj
    }
}

//! Distance-based tapering of observation influence.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point};

/// Gaspari–Cohn fifth-order piecewise rational taper with support `[0, 2]`.
pub fn gaspari_cohn(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::InvalidInput(format!("taper argument must be nonnegative, got {r}")));
    }
    Ok(if r <= 1.0 {
        gc_inner(r)
    } else if r < 2.0 {
        gc_outer(r)
    } else {
        0.0
    })
}

/// The `0 <= r <= 1` branch of [`gaspari_cohn`], evaluated anywhere.
pub fn gc_inner(r: f64) -> f64 {
    let r2 = r * r;
    1.0 - 5.0 / 3.0 * r2 + 5.0 / 8.0 * r2 * r + 0.5 * r2 * r2 - 0.25 * r2 * r2 * r
}

/// The `1 <= r < 2` branch of [`gaspari_cohn`], evaluated anywhere.
pub fn gc_outer(r: f64) -> f64 {
    let r2 = r * r;
    -2.0 / 3.0 / r + 4.0 - 5.0 * r + 5.0 / 3.0 * r2 + 5.0 / 8.0 * r2 * r - 0.5 * r2 * r2 + r2 * r2 * r / 12.0
}

/// `N^2 x kappa` matrix with entry `(l, k) = ρ(||X^l - r^k|| / r_loc)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaperMatrix {
    entries: DMatrix<f64>,
}

impl TaperMatrix {
    pub fn build(grid: &GridSpec, obs_locations: &[Point], r_loc: f64) -> Result<Self> {
        if !(r_loc > 0.0) {
            return Err(Error::InvalidInput(format!("localization radius must be positive, got {r_loc}")));
        }
        if let Some(p) = obs_locations.iter().find(|p| !grid.contains(p)) {
            return Err(Error::InvalidInput(format!("observation at ({}, {}) lies outside the domain", p.x, p.y)));
        }
        let centers = grid.centers();
        let entries = DMatrix::from_fn(centers.len(), obs_locations.len(), |l, k| {
            let r = centers[l].distance(&obs_locations[k]) / r_loc;
            // r is finite and nonnegative here
            gaspari_cohn(r).unwrap_or(0.0)
        });
        Ok(Self { entries })
    }

    /// Constant taper; useful for reductions to the unlocalized filters.
    pub fn constant(cells: usize, kappa: usize, value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidInput(format!("taper value {value} outside [0, 1]")));
        }
        Ok(Self { entries: DMatrix::from_element(cells, kappa, value) })
    }

    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidInput("taper entries must lie in [0, 1]".into()));
        }
        Ok(Self { entries })
    }

    pub fn cells(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kappa(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Diagonal of the per-cell observation taper for cell `l`.
    pub fn row_taper(&self, l: usize) -> Result<Vec<f64>> {
        if l >= self.cells() {
            return Err(Error::InvalidInput(format!("cell {l} out of range (0..{})", self.cells())));
        }
        Ok(self.entries.row(l).iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knots() {
        assert_eq!(gaspari_cohn(0.0).unwrap(), 1.0);
        assert!((gc_inner(1.0) - 5.0 / 24.0).abs() < 1e-12);
        assert!((gc_outer(1.0) - 5.0 / 24.0).abs() < 1e-12);
        assert!(gc_outer(2.0).abs() < 1e-12);
        assert_eq!(gaspari_cohn(2.0).unwrap(), 0.0);
        assert_eq!(gaspari_cohn(7.3).unwrap(), 0.0);
        assert!(gaspari_cohn(-0.1).is_err());
    }

    #[test]
    fn monotone_on_support() {
        let mut prev = gaspari_cohn(0.0).unwrap();
        for k in 1..=10_000 {
            let v = gaspari_cohn(2.0 * k as f64 / 10_000.0).unwrap();
            assert!(v <= prev + 1e-15, "increase at step {k}");
            assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn taper_at_cell_center_is_one() {
        let g = GridSpec::new(10).unwrap();
        let c = g.center(37);
        let t = TaperMatrix::build(&g, &[c], 0.3).unwrap();
        assert_eq!(t.entries()[(37, 0)], 1.0);
    }

    #[test]
    fn large_radius_covers_domain() {
        let g = GridSpec::new(8).unwrap();
        let r_loc = 6.0 * 2f64.sqrt();
        let t = TaperMatrix::build(&g, &[Point::new(0.0, 0.0), Point::new(6.0, 6.0), Point::new(2.0, 5.0)], r_loc).unwrap();
        assert!(t.entries().iter().all(|x| *x > 0.0));
    }

    #[test]
    fn tiny_radius_gives_indicator() {
        let g = GridSpec::new(6).unwrap();
        let wells = vec![g.center(3), Point::new(2.2, 2.2)];
        let t = TaperMatrix::build(&g, &wells, 1e-9).unwrap();
        for l in 0..g.num_cells() {
            assert_eq!(t.entries()[(l, 0)], if l == 3 { 1.0 } else { 0.0 });
            assert_eq!(t.entries()[(l, 1)], 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = GridSpec::new(4).unwrap();
        assert!(TaperMatrix::build(&g, &[Point::new(7.0, 1.0)], 1.0).is_err());
        assert!(TaperMatrix::build(&g, &[Point::new(1.0, 1.0)], 0.0).is_err());
        let t = TaperMatrix::constant(16, 2, 1.0).unwrap();
        assert!(t.row_taper(16).is_err());
        assert_eq!(t.row_taper(3).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn lattice_row_support_matches_distance_enumeration() {
        let g = GridSpec::new(35).unwrap();
        let wells = g.well_lattice(7);
        let t = TaperMatrix::build(&g, &wells, 1.0).unwrap();
        let l = g.index(17, 17);
        let row = t.row_taper(l).unwrap();
        let c = g.center(l);
        for (k, w) in wells.iter().enumerate() {
            let near = c.distance(w) < 2.0;
            assert_eq!(row[k] > 0.0, near, "well {k}");
        }
    }
}

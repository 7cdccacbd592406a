//! Gaussian-kernel observation functionals of a gridded pressure field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    /// `(1/2πσ²) Σ_l exp(-|X^l - r|²/2σ²) P^l Δx²`.
    Literal,
    /// Kernel weights rescaled to sum to one per observation.
    DiscreteNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFunctionalSpec {
    pub sigma: f64,
    pub locations: Vec<Point>,
    pub mode: KernelMode,
}

impl ObservationFunctionalSpec {
    pub fn new(sigma: f64, locations: Vec<Point>, mode: KernelMode) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidInput(format!("kernel width must be positive, got {sigma}")));
        }
        if locations.is_empty() {
            return Err(Error::InvalidInput("no observation locations".into()));
        }
        Ok(Self { sigma, locations, mode })
    }
}

/// Sparse precomputed kernel weights for a fixed grid.
#[derive(Debug, Clone)]
pub struct ObservationOperator {
    pub grid: GridSpec,
    pub spec: ObservationFunctionalSpec,
    weights: Vec<Vec<(usize, f64)>>,
}

impl ObservationOperator {
    pub fn new(grid: GridSpec, spec: ObservationFunctionalSpec) -> Result<Self> {
        for r in &spec.locations {
            if !grid.contains(r) {
                return Err(Error::InvalidInput(format!("observation location ({}, {}) outside the domain", r.x, r.y)));
            }
        }
        let centers = grid.centers();
        let two_s2 = 2.0 * spec.sigma * spec.sigma;
        let weights = spec
            .locations
            .iter()
            .map(|r| {
                let logw: Vec<f64> = centers.iter().map(|c| -c.distance_sq(r) / two_s2).collect();
                match spec.mode {
                    KernelMode::Literal => {
                        let scale = grid.dx() * grid.dx() / (std::f64::consts::PI * two_s2);
                        logw.iter()
                            .enumerate()
                            .map(|(l, lw)| (l, scale * lw.exp()))
                            .filter(|(_, w)| *w > 0.0)
                            .collect()
                    }
                    KernelMode::DiscreteNormalized => {
                        // shift by the largest exponent so the nearest cell never underflows
                        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let raw: Vec<(usize, f64)> = logw
                            .iter()
                            .enumerate()
                            .map(|(l, lw)| (l, (lw - top).exp()))
                            .filter(|(_, w)| *w > 1e-300)
                            .collect();
                        let total: f64 = raw.iter().map(|(_, w)| w).sum();
                        raw.into_iter().map(|(l, w)| (l, w / total)).collect()
                    }
                }
            })
            .collect();
        Ok(Self { grid, spec, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Nonzero `(cell, weight)` pairs of observation `k`.
    pub fn weights(&self, k: usize) -> &[(usize, f64)] {
        &self.weights[k]
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.weights.iter().map(|w| w.iter().map(|(l, c)| c * p[*l]).sum()).collect()
    }

    pub fn observe(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.grid.num_cells() {
            return Err(Error::DimensionMismatch(format!("field has {} cells, grid {}", p.len(), self.grid.num_cells())));
        }
        Ok(self.apply(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice_op(n: usize, mode: KernelMode) -> ObservationOperator {
        let g = GridSpec::new(n).unwrap();
        let spec = ObservationFunctionalSpec::new(0.01, g.well_lattice(3), mode).unwrap();
        ObservationOperator::new(g, spec).unwrap()
    }

    #[test]
    fn normalized_constant_field() {
        let op = lattice_op(14, KernelMode::DiscreteNormalized);
        let out = op.observe(&vec![3.25; 196]).unwrap();
        assert!(out.iter().all(|v| (v - 3.25).abs() < 1e-14));
    }

    #[test]
    fn literal_single_cell() {
        let op = lattice_op(14, KernelMode::Literal);
        let g = op.grid;
        let p: Vec<f64> = (0..196).map(|l| 1.0 + l as f64).collect();
        let out = op.observe(&p).unwrap();
        for (k, r) in op.spec.locations.iter().enumerate() {
            let l = (0..196).min_by(|&a, &b| g.center(a).distance_sq(r).total_cmp(&g.center(b).distance_sq(r))).unwrap();
            let expect = g.dx() * g.dx() / (2.0 * std::f64::consts::PI * 1e-4) * p[l];
            assert!((out[k] - expect).abs() < 1e-10 * expect);
        }
    }

    #[test]
    fn linear() {
        let op = lattice_op(10, KernelMode::DiscreteNormalized);
        let p1: Vec<f64> = (0..100).map(|l| (l as f64 * 0.2).sin()).collect();
        let p2: Vec<f64> = (0..100).map(|l| (l as f64 * 0.05).cos()).collect();
        let comb: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| 2.5 * a + b).collect();
        let (o1, o2, oc) = (op.apply(&p1), op.apply(&p2), op.apply(&comb));
        for k in 0..op.len() {
            assert!((oc[k] - (2.5 * o1[k] + o2[k])).abs() < 1e-13);
        }
    }

    #[test]
    fn off_center_location_is_local_average() {
        let g = GridSpec::new(10).unwrap();
        // midpoint between four cell centers: equal weights
        let spec = ObservationFunctionalSpec::new(0.05, vec![Point::new(1.2, 1.2)], KernelMode::DiscreteNormalized).unwrap();
        let op = ObservationOperator::new(g, spec).unwrap();
        let w = op.weights(0);
        let big: Vec<_> = w.iter().filter(|(_, c)| *c > 1e-3).collect();
        assert_eq!(big.len(), 4);
        for (_, c) in big {
            assert!((c - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(ObservationFunctionalSpec::new(0.0, vec![Point::new(1.0, 1.0)], KernelMode::Literal).is_err());
        let g = GridSpec::new(4).unwrap();
        let spec = ObservationFunctionalSpec::new(0.01, vec![Point::new(7.0, 1.0)], KernelMode::Literal).unwrap();
        assert!(ObservationOperator::new(g, spec).is_err());
    }
}

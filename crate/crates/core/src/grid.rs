//! Uniform cell-centered grid on the square domain `[0, L] x [0, L]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the aquifer domain.
pub const DOMAIN_LENGTH: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// `n x n` cells of width `dx = length / n`. Cells are numbered
/// `l = i + n * j` with `i` along x and `j` along y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub length: f64,
}

impl GridSpec {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_length(n, DOMAIN_LENGTH)
    }

    pub fn with_length(n: usize, length: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("grid needs at least one cell per side".into()));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidInput(format!("domain length must be positive, got {length}")));
        }
        Ok(Self { n, length })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn num_cells(&self) -> usize {
        self.n * self.n
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n * j
    }

    pub fn ij(&self, l: usize) -> (usize, usize) {
        (l % self.n, l / self.n)
    }

    pub fn center(&self, l: usize) -> Point {
        let (i, j) = self.ij(l);
        let dx = self.dx();
        Point::new((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dx)
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.num_cells()).map(|l| self.center(l)).collect()
    }

    /// Closed-domain membership test.
    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.length).contains(&p.x) && (0.0..=self.length).contains(&p.y)
    }

    /// `k x k` lattice of cell centers spread evenly over the interior.
    pub fn well_lattice(&self, k: usize) -> Vec<Point> {
        let idx: Vec<usize> = (0..k)
            .map(|a| {
                let pos = (a as f64 + 0.5) * self.n as f64 / k as f64 - 0.5;
                (pos.round().max(0.0) as usize).min(self.n - 1)
            })
            .collect();
        let mut out = Vec::with_capacity(k * k);
        for &j in &idx {
            for &i in &idx {
                out.push(self.center(self.index(i, j)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_lie_inside_domain() {
        let g = GridSpec::new(35).unwrap();
        assert!((g.dx() * g.n as f64 - 6.0).abs() < 1e-12);
        for p in g.centers() {
            assert!(p.x > 0.0 && p.x < 6.0 && p.y > 0.0 && p.y < 6.0);
        }
        let (i, j) = g.ij(g.index(3, 17));
        assert_eq!((i, j), (3, 17));
    }

    #[test]
    fn lattice_is_symmetric_on_35() {
        let g = GridSpec::new(35).unwrap();
        let wells = g.well_lattice(7);
        assert_eq!(wells.len(), 49);
        let xs: Vec<f64> = wells[..7].iter().map(|p| p.x).collect();
        for (a, b) in xs.iter().zip(xs.iter().rev()) {
            assert!((a + b - 6.0).abs() < 1e-12);
        }
    }
}

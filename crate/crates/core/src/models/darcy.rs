//! Steady single-phase Darcy flow `-∇·(k∇P) = F` on a cell-centered grid.
//!
//! Boundary conditions: `P = P_D` on `y = 0`, prescribed inflow
//! `-k ∂P/∂x = f(y) (1 + q)` on `x = 0`, no flow on `x = L` and `y = L`.
//! Face transmissibilities use the harmonic mean of the adjacent cells; the
//! Dirichlet condition is eliminated through a ghost value half a cell
//! below the boundary.

use std::sync::Arc;

use super::cg::pcg;
use super::kl::KlBasis;
use super::observation::ObservationOperator;
use super::ForwardModel;
use crate::error::{ensure_dims, Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy)]
pub struct LinearSolverConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for LinearSolverConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceTerm {
    /// 0 for `y <= 4`, 137 for `4 < y <= 5`, 274 above, evaluated at cell centers.
    Banded,
    Zero,
    /// One value per cell.
    Cells(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct DarcyProblem {
    pub grid: GridSpec,
    /// Source per cell.
    pub source: Vec<f64>,
    /// Base inflow flux density per left-boundary face, scaled by `1 + q`.
    pub inflow: Vec<f64>,
    pub dirichlet: f64,
    pub solver: LinearSolverConfig,
}

impl DarcyProblem {
    /// The aquifer benchmark: banded source, inflow 500, `P = 100` at the bottom.
    pub fn benchmark(grid: GridSpec) -> Self {
        Self::new(grid, SourceTerm::Banded, vec![500.0; grid.n], 100.0).expect("consistent sizes")
    }

    pub fn new(grid: GridSpec, source: SourceTerm, inflow: Vec<f64>, dirichlet: f64) -> Result<Self> {
        ensure_dims(inflow.len() == grid.n, || format!("{} inflow faces for n = {}", inflow.len(), grid.n))?;
        let source = match source {
            SourceTerm::Banded => (0..grid.num_cells())
                .map(|l| {
                    let y = grid.center(l).y;
                    if y <= 4.0 {
                        0.0
                    } else if y <= 5.0 {
                        137.0
                    } else {
                        274.0
                    }
                })
                .collect(),
            SourceTerm::Zero => vec![0.0; grid.num_cells()],
            SourceTerm::Cells(v) => {
                ensure_dims(v.len() == grid.num_cells(), || format!("{} source values for {} cells", v.len(), grid.num_cells()))?;
                v
            }
        };
        Ok(Self { grid, source, inflow, dirichlet, solver: LinearSolverConfig::default() })
    }

    fn transmissibilities(&self, k: &[f64]) -> Transmissibility {
        let n = self.grid.n;
        let cells = n * n;
        let harm = |a: f64, b: f64| 2.0 * a * b / (a + b);
        let mut east = vec![0.0; cells];
        let mut north = vec![0.0; cells];
        let mut diag = vec![0.0; cells];
        for j in 0..n {
            for i in 0..n {
                let l = i + n * j;
                if i + 1 < n {
                    let t = harm(k[l], k[l + 1]);
                    east[l] = t;
                    diag[l] += t;
                    diag[l + 1] += t;
                }
                if j + 1 < n {
                    let t = harm(k[l], k[l + n]);
                    north[l] = t;
                    diag[l] += t;
                    diag[l + n] += t;
                }
            }
        }
        // bottom faces: half-cell distance to the boundary value
        for i in 0..n {
            diag[i] += 2.0 * k[i];
        }
        Transmissibility { n, east, north, diag }
    }

    fn rhs(&self, k: &[f64], q: f64) -> Vec<f64> {
        let n = self.grid.n;
        let area = self.grid.dx() * self.grid.dx();
        let mut b: Vec<f64> = self.source.iter().map(|f| f * area).collect();
        for i in 0..n {
            b[i] += 2.0 * k[i] * self.dirichlet;
        }
        for j in 0..n {
            b[n * j] += self.inflow[j] * (1.0 + q) * self.grid.dx();
        }
        b
    }

    /// Pressure for permeability `k` (one value per cell) and model error `q`.
    pub fn solve(&self, k: &[f64], q: f64) -> Result<Vec<f64>> {
        ensure_dims(k.len() == self.grid.num_cells(), || format!("{} permeabilities for {} cells", k.len(), self.grid.num_cells()))?;
        if k.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidInput("permeability must be positive and finite".into()));
        }
        if !q.is_finite() {
            return Err(Error::InvalidInput("model error must be finite".into()));
        }
        let t = self.transmissibilities(k);
        let b = self.rhs(k, q);
        let mut p = vec![self.dirichlet; k.len()];
        pcg(|x, y| t.apply(x, y), &t.diag, &b, &mut p, self.solver.rel_tol, self.solver.max_iter)?;
        Ok(p)
    }

    pub fn solve_log_k(&self, log_k: &[f64], q: f64) -> Result<Vec<f64>> {
        let k: Vec<f64> = log_k.iter().map(|x| x.exp()).collect();
        self.solve(&k, q)
    }

    /// Integrated boundary and source fluxes for a computed pressure.
    pub fn flux_balance(&self, k: &[f64], p: &[f64], q: f64) -> FluxBalance {
        let n = self.grid.n;
        let dx = self.grid.dx();
        let inflow: f64 = self.inflow.iter().map(|f| f * (1.0 + q) * dx).sum();
        let source: f64 = self.source.iter().map(|f| f * dx * dx).sum();
        let outflow: f64 = (0..n).map(|i| 2.0 * k[i] * (p[i] - self.dirichlet)).sum();
        FluxBalance { inflow, source, outflow }
    }
}

/// Net flux into the domain is `inflow + source - outflow`.
#[derive(Debug, Clone, Copy)]
pub struct FluxBalance {
    pub inflow: f64,
    pub source: f64,
    /// Flux leaving through the Dirichlet boundary.
    pub outflow: f64,
}

impl FluxBalance {
    pub fn relative_imbalance(&self) -> f64 {
        (self.inflow + self.source - self.outflow).abs() / (self.inflow.abs() + self.source.abs()).max(f64::MIN_POSITIVE)
    }
}

struct Transmissibility {
    n: usize,
    east: Vec<f64>,
    north: Vec<f64>,
    diag: Vec<f64>,
}

impl Transmissibility {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        let cells = x.len();
        for l in 0..cells {
            y[l] = self.diag[l] * x[l];
        }
        // each face couples two cells; east[l] is zero on the right boundary
        for l in 0..cells - 1 {
            let t = self.east[l];
            y[l] -= t * x[l + 1];
            y[l + 1] -= t * x[l];
        }
        for l in 0..cells - n {
            let t = self.north[l];
            y[l] -= t * x[l + n];
            y[l + n] -= t * x[l];
        }
    }
}

/// Inversion model: KL coefficients and inflow error to observed pressures.
#[derive(Clone)]
pub struct DarcyModel {
    pub problem: Arc<DarcyProblem>,
    pub basis: Arc<KlBasis>,
    pub observation: Arc<ObservationOperator>,
}

impl DarcyModel {
    pub fn new(problem: DarcyProblem, basis: KlBasis, observation: ObservationOperator) -> Result<Self> {
        ensure_dims(problem.grid == basis.grid && problem.grid == observation.grid, || {
            "problem, basis and observation operator must share a grid".into()
        })?;
        Ok(Self { problem: Arc::new(problem), basis: Arc::new(basis), observation: Arc::new(observation) })
    }

    pub fn pressure(&self, u: &[f64], q: f64) -> Result<Vec<f64>> {
        let log_k = self.basis.sample_log_permeability(u)?;
        self.problem.solve_log_k(&log_k, q)
    }
}

impl ForwardModel for DarcyModel {
    fn param_dim(&self) -> usize {
        self.basis.m_kl()
    }

    fn error_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        self.observation.len()
    }

    fn evaluate(&self, u: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        ensure_dims(q.len() == 1, || format!("Darcy model error is scalar, got {} entries", q.len()))?;
        let p = self.pressure(u, q[0])?;
        Ok(self.observation.apply(&p))
    }
}

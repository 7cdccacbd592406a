//! Entropic approximation of the transport problem (log-domain Sinkhorn).

use nalgebra::DMatrix;

use super::plan::{CostMatrix, TransportPlan};
use crate::ensemble::WeightVector;
use crate::error::{ensure_dims, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop once the row-marginal L1 error falls below this.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { epsilon: 1e-2, max_iter: 10_000, tol: 1e-9 }
    }
}

fn logsumexp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + it.map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn solve_ot_entropic(cost: &CostMatrix, w: &WeightVector, cfg: &SinkhornConfig) -> Result<TransportPlan> {
    let m = w.len();
    ensure_dims(cost.size() == m, || format!("cost of size {} for {} weights", cost.size(), m))?;
    if !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("entropic regularization must be positive, got {}", cfg.epsilon)));
    }
    if m == 1 {
        return Ok(TransportPlan::from_parts(DMatrix::from_element(1, 1, 1.0), vec![1.0]));
    }
    let c = cost.matrix();
    let eps = cfg.epsilon;
    let log_a: Vec<f64> = w.as_slice().iter().map(|x| x.ln()).collect();
    let log_b = -(m as f64).ln();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; m];

    let plan_of = |f: &[f64], g: &[f64]| DMatrix::from_fn(m, m, |i, j| ((f[i] + g[j] - c[(i, j)]) / eps).exp());
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        for i in 0..m {
            f[i] = if log_a[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                eps * log_a[i] - eps * logsumexp((0..m).map(|j| (g[j] - c[(i, j)]) / eps))
            };
        }
        for j in 0..m {
            g[j] = eps * log_b - eps * logsumexp((0..m).map(|i| (f[i] - c[(i, j)]) / eps));
        }
        // columns are exact after the g-update; measure the rows
        residual = (0..m)
            .map(|i| {
                let row = logsumexp((0..m).map(|j| (f[i] + g[j] - c[(i, j)]) / eps)).exp();
                (row - w[i]).abs()
            })
            .sum();
        if residual < cfg.tol {
            return Ok(TransportPlan::from_parts(plan_of(&f, &g), w.as_slice().to_vec()));
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_iter, residual })
}

//! Optimal-transport resampling.
//!
//! The weighted ensemble is coupled to an equally weighted copy of itself by
//! the plan minimizing the expected squared distance, and each new member is
//! the plan-weighted average of the old ones ([`transform`]).

mod network_simplex;
mod one_d;
mod plan;
mod sinkhorn;

pub use network_simplex::solve_ot;
pub use one_d::{solve_ot_1d, transform_1d};
pub use plan::{transform, CostMatrix, TransportPlan};
pub use sinkhorn::{solve_ot_entropic, SinkhornConfig};

use crate::ensemble::WeightVector;
use crate::error::Result;

/// Which solver resamples the joint state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TransportSolver {
    #[default]
    Exact,
    Entropic(SinkhornConfig),
}

impl TransportSolver {
    pub fn solve(&self, cost: &CostMatrix, w: &WeightVector) -> Result<TransportPlan> {
        match self {
            TransportSolver::Exact => solve_ot(cost, w),
            TransportSolver::Entropic(cfg) => solve_ot_entropic(cost, w, cfg),
        }
    }
}

//! Forward problems.

mod bessel;
mod cg;
mod darcy;
mod kl;
mod observation;
mod synthetic;
mod toy;

pub use bessel::{bessel_k1, matern_correlation};
pub use cg::{pcg, CgOutcome};
pub use darcy::{DarcyModel, DarcyProblem, LinearSolverConfig, SourceTerm};
pub use kl::{build_kl_basis, whittle_matern_cov, FieldMap, KlBasis};
pub use observation::{KernelMode, ObservationFunctionalSpec, ObservationOperator};
pub use synthetic::{synthesize_observations, SyntheticData};
pub use toy::{toy_forward, ToyModel, TOY_CENTER};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::ensemble::Ensemble;
use crate::error::Result;

/// Erroneous forward map `g(u, q)` from parameters and model error to
/// predicted observations.
pub trait ForwardModel: Sync {
    fn param_dim(&self) -> usize;
    fn error_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn evaluate(&self, u: &[f64], q: &[f64]) -> Result<Vec<f64>>;
}

/// Predictions for every member (`kappa x M`). Failed evaluations leave a
/// column of NaN and are flagged in `failed`.
#[derive(Debug, Clone)]
pub struct Evaluations {
    pub predictions: DMatrix<f64>,
    pub failed: Vec<bool>,
}

impl Evaluations {
    pub fn failures(&self) -> usize {
        self.failed.iter().filter(|f| **f).count()
    }
}

/// Evaluates the model on all members as a parallel map.
pub fn evaluate_ensemble<G: ForwardModel + ?Sized>(model: &G, ens: &Ensemble) -> Evaluations {
    let kappa = model.obs_dim();
    let results: Vec<Option<Vec<f64>>> = (0..ens.size())
        .into_par_iter()
        .map(|i| model.evaluate(ens.params(i), ens.model_error(i)).ok().filter(|g| g.len() == kappa))
        .collect();
    let mut predictions = DMatrix::from_element(kappa, ens.size(), f64::NAN);
    let mut failed = vec![false; ens.size()];
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some(g) => predictions.column_mut(i).copy_from_slice(&g),
            None => failed[i] = true,
        }
    }
    Evaluations { predictions, failed }
}

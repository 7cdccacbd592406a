//! Synthetic data from a truth drawn on its own (typically finer) grid.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::darcy::DarcyProblem;
use super::kl::KlBasis;
use super::observation::{ObservationFunctionalSpec, ObservationOperator};
use crate::ensemble::ObservationSet;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticData {
    pub observations: ObservationSet,
    /// The realized noise `η`, so `y_obs = clean + η`.
    pub noise: Vec<f64>,
    pub clean: Vec<f64>,
    pub truth_coefficients: Vec<f64>,
    pub truth_log_k: Vec<f64>,
    pub truth_pressure: Vec<f64>,
    pub seed: u64,
}

/// Draws a truth `u ~ N(0, I)` from `basis`, solves with `q = 0` and adds
/// `η ~ N(0, s² I)` with `s = noise_level ||L(P)|| / √κ`.
pub fn synthesize_observations(
    problem: &DarcyProblem,
    basis: &KlBasis,
    spec: &ObservationFunctionalSpec,
    noise_level: f64,
    seed: u64,
) -> Result<SyntheticData> {
    if !(noise_level > 0.0) {
        return Err(Error::InvalidInput(format!("noise level must be positive, got {noise_level}")));
    }
    let mut rng = stream(seed, Purpose::Truth, 0, 0);
    let u: Vec<f64> = (0..basis.m_kl()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let log_k = basis.sample_log_permeability(&u)?;
    let pressure = problem.solve_log_k(&log_k, 0.0)?;
    let op = ObservationOperator::new(problem.grid, spec.clone())?;
    let clean = op.apply(&pressure);
    let kappa = clean.len();
    let norm = clean.iter().map(|x| x * x).sum::<f64>().sqrt();
    let std = noise_level * norm / (kappa as f64).sqrt();
    let mut rng = stream(seed, Purpose::ObservationNoise, 0, 0);
    let noise: Vec<f64> = (0..kappa).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); std * z }).collect();
    let values = clean.iter().zip(&noise).map(|(c, e)| c + e).collect();
    let observations = ObservationSet::with_isotropic_noise(values, Some(spec.locations.clone()), std * std)?;
    Ok(SyntheticData {
        observations,
        noise,
        clean,
        truth_coefficients: u,
        truth_log_k: log_k,
        truth_pressure: pressure,
        seed,
    })
}

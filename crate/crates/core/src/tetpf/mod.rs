//! Tempered ensemble transform particle filters.
//!
//! Each tempering iteration evaluates the model on every member, picks the
//! next temperature from the effective sample size, resamples
//! deterministically by optimal transport and rejuvenates the ensemble with
//! pcn-MCMC. [`tetpf_assimilate`] transports the joint state; the localized
//! [`tletpf_assimilate`] transports each grid cell separately and the scalar
//! model error globally.

mod global;
mod localized;
mod mutation;
mod tempering;

pub use global::tetpf_assimilate;
pub use localized::{local_misfits, tletpf_assimilate, tletpf_update_field, tletpf_update_model_error};
pub use mutation::{mutate, propose, propose_with, MutationConfig, MutationOutcome, UniformMove};
pub use tempering::{select_temperature, select_temperature_by, TemperatureStep, MIN_INCREMENT};

pub(crate) use mutation::mutate_with_purpose;

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::ensemble::{compute_misfits, ObservationSet};
use crate::error::Result;
use crate::models::{Evaluations, ForwardModel};
use crate::transport::TransportSolver;

#[derive(Debug, Clone, PartialEq)]
pub struct TetpfConfig {
    /// ESS threshold `1 < M_thresh < M`.
    pub m_thresh: f64,
    pub mutation: MutationConfig,
    pub transport: TransportSolver,
    pub seed: u64,
    /// Abort when the temperature has not reached one after this many iterations.
    pub max_iterations: usize,
}

impl TetpfConfig {
    pub fn new(m_thresh: f64, mutation: MutationConfig, seed: u64) -> Self {
        Self { m_thresh, mutation, transport: TransportSolver::Exact, seed, max_iterations: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub phi: f64,
    pub ess: f64,
    pub acceptance_rate: f64,
    pub stalled: bool,
    pub failures: usize,
    /// Seconds spent in this iteration; kept out of the CSV so that output
    /// stays byte-reproducible.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterDiagnostics {
    pub iterations: usize,
    pub model_evaluations: usize,
    pub trace: Vec<IterationRecord>,
}

impl FilterDiagnostics {
    pub fn final_acceptance_rate(&self) -> Option<f64> {
        self.trace.last().map(|r| r.acceptance_rate)
    }

    pub fn stalled_iterations(&self) -> usize {
        self.trace.iter().filter(|r| r.stalled).count()
    }

    pub const CSV_HEADER: &'static str = "iteration,phi,ess,acceptance_rate,stalled,failures";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.trace {
            let _ = writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{},{}",
                r.iteration, r.phi, r.ess, r.acceptance_rate, r.stalled as u8, r.failures
            );
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("iteration,wall_time_s\n");
        for r in &self.trace {
            let _ = writeln!(out, "{},{:.6}", r.iteration, r.wall_time);
        }
        out
    }
}

/// Filter output: the final ensemble and its diagnostics.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub ensemble: crate::ensemble::Ensemble,
    pub diagnostics: FilterDiagnostics,
}

/// Misfits with failed evaluations mapped to `+∞` (zero weight).
pub(crate) fn misfits_or_infinite(evals: &Evaluations, obs: &ObservationSet) -> Result<Vec<f64>> {
    let mut preds = evals.predictions.clone();
    for (i, failed) in evals.failed.iter().enumerate() {
        if *failed {
            preds.column_mut(i).copy_from_slice(&obs.values);
        }
    }
    let mut m = compute_misfits(&preds, obs, None)?;
    for (i, failed) in evals.failed.iter().enumerate() {
        if *failed {
            m[i] = f64::INFINITY;
        }
    }
    Ok(m)
}

/// Misfit of a full member `v = [u, q]` under `model`.
pub fn member_misfit<G: ForwardModel + ?Sized>(model: &G, obs: &ObservationSet, v: &[f64]) -> Result<f64> {
    let n = model.param_dim();
    let g = model.evaluate(&v[..n], &v[n..])?;
    let preds = DMatrix::from_column_slice(g.len(), 1, &g);
    Ok(compute_misfits(&preds, obs, None)?[0])
}

pub(crate) fn aborted(diag: &FilterDiagnostics, reason: String) -> crate::Error {
    crate::Error::Aborted { iterations: diag.iterations, reason, partial_csv: diag.to_csv() }
}

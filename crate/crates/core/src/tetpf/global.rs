use std::time::Instant;

use super::{aborted, member_misfit, misfits_or_infinite, select_temperature, FilterDiagnostics, FilterOutput};
use super::{mutate, IterationRecord, TetpfConfig};
use crate::ensemble::{tempered_weights, Ensemble, ObservationSet};
use crate::error::{ensure_dims, Error, Result};
use crate::models::{evaluate_ensemble, ForwardModel};
use crate::transport::{transform, CostMatrix};

/// Tempered ETPF on the joint state `v = [u, q]`.
pub fn tetpf_assimilate<G: ForwardModel + ?Sized>(
    initial: &Ensemble,
    model: &G,
    obs: &ObservationSet,
    cfg: &TetpfConfig,
) -> Result<FilterOutput> {
    ensure_dims(initial.param_dim() == model.param_dim() && initial.error_dim() == model.error_dim(), || {
        format!(
            "ensemble has blocks ({}, {}), model expects ({}, {})",
            initial.param_dim(),
            initial.error_dim(),
            model.param_dim(),
            model.error_dim()
        )
    })?;
    ensure_dims(model.obs_dim() == obs.len(), || {
        format!("model predicts {} observations, {} given", model.obs_dim(), obs.len())
    })?;
    let size = initial.size();
    let mut ens = initial.clone();
    let mut phi = 0.0;
    let mut diag = FilterDiagnostics::default();
    let misfit = |v: &[f64]| member_misfit(model, obs, v);

    while phi < 1.0 {
        if diag.iterations >= cfg.max_iterations {
            return Err(aborted(&diag, format!("temperature {phi} after {} iterations", diag.iterations)));
        }
        let start = Instant::now();
        let t = diag.iterations + 1;

        let evals = evaluate_ensemble(model, &ens);
        diag.model_evaluations += size;
        let misfits = misfits_or_infinite(&evals, obs)?;

        let step = select_temperature(&misfits, phi, cfg.m_thresh)?;
        if step.stalled {
            log::warn!("tempering stalled at phi = {phi:.3e} (iteration {t})");
        }
        let w = tempered_weights(&misfits, step.phi - phi)?;
        let cost = CostMatrix::squared_euclidean(ens.data());
        let plan = cfg.transport.solve(&cost, &w)?;
        let resampled = Ensemble::new(transform(ens.data(), &plan)?, ens.param_dim(), ens.error_dim())?;

        let out = mutate(&resampled, step.phi, &cfg.mutation, misfit, None, cfg.seed, t as u64)?;
        diag.model_evaluations += out.evaluations;
        ens = out.ensemble;
        phi = step.phi;
        diag.iterations = t;
        diag.trace.push(IterationRecord {
            iteration: t,
            phi,
            ess: step.ess,
            acceptance_rate: out.acceptance_rate,
            stalled: step.stalled,
            failures: evals.failures() + out.failures,
            wall_time: start.elapsed().as_secs_f64(),
        });
    }

    let expected = diag.iterations * size * (cfg.mutation.tau_max + 1);
    if diag.model_evaluations != expected {
        return Err(Error::Model(format!("made {} evaluations, expected {expected}", diag.model_evaluations)));
    }
    Ok(FilterOutput { ensemble: ens, diagnostics: diag })
}

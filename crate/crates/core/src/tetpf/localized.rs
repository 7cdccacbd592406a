use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{aborted, member_misfit, misfits_or_infinite, mutate, select_temperature_by};
use super::{FilterDiagnostics, FilterOutput, IterationRecord, TetpfConfig};
use crate::ensemble::{misfit_components, tempered_ess, tempered_weights, Ensemble, ObservationSet};
use crate::error::{ensure_dims, Error, Result};
use crate::localization::TaperMatrix;
use crate::models::{evaluate_ensemble, FieldMap, ForwardModel};
use crate::transport::{transform, transform_1d, CostMatrix, TransportSolver};

/// Localized misfits `Σ_k C_lk d_ki² / R_kk` for every cell (`N² x M`).
///
/// Infinite components (failed evaluations) only contribute where the taper
/// is positive.
pub fn local_misfits(taper: &TaperMatrix, components: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_dims(taper.kappa() == components.nrows(), || {
        format!("taper has {} observations, components {}", taper.kappa(), components.nrows())
    })?;
    if components.iter().all(|x| x.is_finite()) {
        return Ok(taper.entries() * components);
    }
    let c = taper.entries();
    Ok(DMatrix::from_fn(c.nrows(), components.ncols(), |l, i| {
        (0..c.ncols()).filter(|&k| c[(l, k)] > 0.0).map(|k| c[(l, k)] * components[(k, i)]).sum()
    }))
}

/// Per-cell univariate transport of a grid field (`N² x M`).
///
/// Cell `l` is resampled with weights from its tapered misfits raised to
/// the increment `dphi`.
pub fn tletpf_update_field(
    field: &DMatrix<f64>,
    taper: &TaperMatrix,
    components: &DMatrix<f64>,
    dphi: f64,
) -> Result<DMatrix<f64>> {
    ensure_dims(field.nrows() == taper.cells() && field.ncols() == components.ncols(), || {
        format!(
            "field is {}x{}, taper has {} cells, components {} members",
            field.nrows(),
            field.ncols(),
            taper.cells(),
            components.ncols()
        )
    })?;
    let local = local_misfits(taper, components)?;
    update_rows(field, &local, dphi)
}

fn update_rows(field: &DMatrix<f64>, local: &DMatrix<f64>, dphi: f64) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = (0..field.nrows())
        .into_par_iter()
        .map(|l| {
            let misfits: Vec<f64> = local.row(l).iter().copied().collect();
            let values: Vec<f64> = field.row(l).iter().copied().collect();
            let w = tempered_weights(&misfits, dphi)?;
            transform_1d(&values, &w)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(field.nrows(), field.ncols(), |l, i| rows[l][i]))
}

/// Global transport of a scalar model error given the already updated
/// parameters `u_tilde`. Re-evaluates `g(ũ_i, q_i)`; returns the new `q`
/// block and the number of evaluations made.
pub fn tletpf_update_model_error<G: ForwardModel + ?Sized>(
    u_tilde: &DMatrix<f64>,
    q: &DMatrix<f64>,
    model: &G,
    obs: &ObservationSet,
    dphi: f64,
    solver: &TransportSolver,
) -> Result<(DMatrix<f64>, usize)> {
    if q.nrows() != 1 {
        return Err(Error::Unsupported(format!(
            "localized model-error update is defined for a scalar model error, got {} coordinates",
            q.nrows()
        )));
    }
    let joint = Ensemble::from_blocks(u_tilde, q)?;
    let evals = evaluate_ensemble(model, &joint);
    let misfits = misfits_or_infinite(&evals, obs)?;
    let w = tempered_weights(&misfits, dphi)?;
    let cost = CostMatrix::squared_euclidean(joint.data());
    let plan = solver.solve(&cost, &w)?;
    Ok((transform(q, &plan)?, joint.size()))
}

/// Localized tempered ETPF for parameters `u` mapped to a grid field by
/// `field_map` and a scalar model error.
///
/// The temperature increment is the largest one keeping the smallest
/// per-cell ESS above `M_thresh`.
pub fn tletpf_assimilate<G, A>(
    initial: &Ensemble,
    field_map: &A,
    model: &G,
    obs: &ObservationSet,
    taper: &TaperMatrix,
    cfg: &TetpfConfig,
) -> Result<FilterOutput>
where
    G: ForwardModel + ?Sized,
    A: FieldMap + ?Sized,
{
    ensure_dims(initial.param_dim() == field_map.num_params() && initial.param_dim() == model.param_dim(), || {
        format!(
            "ensemble has {} parameters, field map {}, model {}",
            initial.param_dim(),
            field_map.num_params(),
            model.param_dim()
        )
    })?;
    ensure_dims(taper.cells() == field_map.num_cells() && taper.kappa() == obs.len(), || {
        format!("taper is {}x{} for {} cells and {} observations", taper.cells(), taper.kappa(), field_map.num_cells(), obs.len())
    })?;
    if initial.error_dim() != 1 {
        return Err(Error::Unsupported("localized filter needs a scalar model error".into()));
    }
    let size = initial.size();
    let m_thresh = cfg.m_thresh;
    if !(m_thresh > 1.0 && m_thresh < size as f64) {
        return Err(Error::InvalidInput(format!("ESS threshold {m_thresh} outside (1, {size})")));
    }
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
        let mut preds = evals.predictions.clone();
        for (i, failed) in evals.failed.iter().enumerate() {
            if *failed {
                preds.column_mut(i).copy_from_slice(&obs.values);
            }
        }
        let mut components = misfit_components(&preds, obs)?;
        for (i, failed) in evals.failed.iter().enumerate() {
            if *failed {
                components.column_mut(i).fill(f64::INFINITY);
            }
        }
        let local = local_misfits(taper, &components)?;
        let rows: Vec<Vec<f64>> = local.row_iter().map(|r| r.iter().copied().collect()).collect();
        let min_local_ess = |dphi: f64| {
            rows.par_iter().map(|m| tempered_ess(m, dphi)).reduce(|| f64::INFINITY, f64::min)
        };
        let step = select_temperature_by(min_local_ess, phi, m_thresh)?;
        if step.stalled {
            log::warn!("tempering stalled at phi = {phi:.3e} (iteration {t})");
        }
        let dphi = step.phi - phi;

        let field = field_map.to_field(&ens.param_block());
        let field = update_rows(&field, &local, dphi)?;
        let u_tilde = field_map.from_field(&field);
        let (q_tilde, n_evals) =
            tletpf_update_model_error(&u_tilde, &ens.error_block(), model, obs, dphi, &cfg.transport)?;
        diag.model_evaluations += n_evals;
        let resampled = Ensemble::from_blocks(&u_tilde, &q_tilde)?;

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

    let expected = diag.iterations * size * (cfg.mutation.tau_max + 2);
    if diag.model_evaluations != expected {
        return Err(Error::Model(format!("made {} evaluations, expected {expected}", diag.model_evaluations)));
    }
    Ok(FilterOutput { ensemble: ens, diagnostics: diag })
}

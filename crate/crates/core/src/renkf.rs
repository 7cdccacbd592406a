//! Regularized ensemble Kalman filter with perturbed observations.
//!
//! Each iteration inflates the observation covariance to `B_gg + μR`, with
//! `μ` found by doubling until the regularization condition on the mean
//! innovation holds, and stops by the discrepancy principle against the
//! realized observation noise. The localized variant tapers the gain of a
//! grid-based field element-wise.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::ensemble::{ensemble_mean, Ensemble, NoiseCovariance, ObservationSet};
use crate::error::{ensure_dims, Error, Result};
use crate::localization::TaperMatrix;
use crate::models::{evaluate_ensemble, FieldMap, ForwardModel};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenkfConfig {
    /// `Ω ∈ (0, 1)`.
    pub omega: f64,
    /// First trial regularization parameter.
    pub mu0: f64,
    pub max_doublings: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Abort when `max_iterations` sweeps pass without meeting the stopping
    /// rule. When false the last ensemble is returned with
    /// `converged = false` instead.
    pub abort_on_cap: bool,
}

impl RenkfConfig {
    pub fn new(seed: u64) -> Self {
        Self { omega: 0.7, mu0: 1.0, max_doublings: 64, max_iterations: 1000, seed, abort_on_cap: true }
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::InvalidInput(format!("omega {} outside (0, 1)", self.omega)));
        }
        if !(self.mu0 > 0.0) {
            return Err(Error::InvalidInput(format!("mu0 must be positive, got {}", self.mu0)));
        }
        Ok(())
    }
}

/// Element-wise localization of the log-permeability gain.
#[derive(Clone, Copy)]
pub struct Localization<'a> {
    pub taper: &'a TaperMatrix,
    pub field_map: &'a dyn FieldMap,
}

/// `(B_gg, B_vg)` with `1/(M-1)` normalization; `members` is `d x M`,
/// `predictions` is `kappa x M`.
pub fn empirical_covariances(members: &DMatrix<f64>, predictions: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let size = members.ncols();
    if size < 2 {
        return Err(Error::InvalidInput(format!("need at least two members, got {size}")));
    }
    ensure_dims(predictions.ncols() == size, || format!("{} members but {} predictions", size, predictions.ncols()))?;
    let dg = centered(predictions);
    let dv = centered(members);
    let scale = 1.0 / (size - 1) as f64;
    Ok((&dg * dg.transpose() * scale, &dv * dg.transpose() * scale))
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = ensemble_mean(x);
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        col -= &mean;
    }
    out
}

/// `sqrt(x' R x) = ||R^{1/2} x||`.
fn r_half_norm(r: &NoiseCovariance, x: &DVector<f64>) -> f64 {
    match r {
        NoiseCovariance::Diagonal(d) => x.iter().zip(d).map(|(a, b)| a * a * b).sum::<f64>().sqrt(),
        NoiseCovariance::Full { .. } => x.dot(&(r.to_matrix() * x)).max(0.0).sqrt(),
    }
}

/// First `μ = μ0 2^τ` with
/// `μ ||R^{1/2} (B_gg + μR)^{-1} d|| >= Ω ||R^{-1/2} d||`.
pub fn select_mu(
    b_gg: &DMatrix<f64>,
    r: &NoiseCovariance,
    innovation: &DVector<f64>,
    omega: f64,
    mu0: f64,
    max_doublings: usize,
) -> Result<f64> {
    ensure_dims(b_gg.nrows() == r.dim() && innovation.len() == r.dim(), || {
        format!("B_gg is {}x{}, R has dimension {}, innovation {}", b_gg.nrows(), b_gg.ncols(), r.dim(), innovation.len())
    })?;
    let rhs = omega * r.whitened_norm(innovation);
    let rmat = r.to_matrix();
    let mut mu = mu0;
    let mut ratio = 0.0;
    for _ in 0..=max_doublings {
        let k = b_gg + &rmat * mu;
        let chol = k.cholesky().ok_or_else(|| Error::NotPositiveDefinite(format!("B_gg + {mu} R")))?;
        let lhs = mu * r_half_norm(r, &chol.solve(innovation));
        if lhs >= rhs {
            return Ok(mu);
        }
        ratio = lhs / rhs;
        mu *= 2.0;
    }
    Err(Error::RegularizationFailed { doublings: max_doublings, ratio })
}

/// `||R^{-1/2} d|| <= ||R^{-1/2} η|| / Ω`.
pub fn discrepancy_stop(innovation: &DVector<f64>, r: &NoiseCovariance, noise: &[f64], omega: f64) -> bool {
    r.whitened_norm(innovation) <= r.whitened_norm(&DVector::from_column_slice(noise)) / omega
}

/// `(B_gg + μR)^{-1} (y_i^η - g_i)` for all members.
fn kalman_increments(
    b_gg: &DMatrix<f64>,
    r: &NoiseCovariance,
    mu: f64,
    perturbed: &DMatrix<f64>,
    predictions: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(format!("mu must be positive, got {mu}")));
    }
    let k = b_gg + r.to_matrix() * mu;
    let chol = k.cholesky().ok_or_else(|| Error::NotPositiveDefinite(format!("B_gg + {mu} R")))?;
    Ok(chol.solve(&(perturbed - predictions)))
}

/// `v_i <- v_i + B_vg (B_gg + μR)^{-1} (y_i^η - g_i)`.
pub fn renkf_update(
    ens: &Ensemble,
    predictions: &DMatrix<f64>,
    perturbed: &DMatrix<f64>,
    r: &NoiseCovariance,
    mu: f64,
) -> Result<Ensemble> {
    let (b_gg, b_vg) = empirical_covariances(ens.data(), predictions)?;
    let x = kalman_increments(&b_gg, r, mu, perturbed, predictions)?;
    Ensemble::new(ens.data() + b_vg * x, ens.param_dim(), ens.error_dim())
}

/// Localized update: `log k` with the tapered gain `C ∘ B^{log k, g}`, the
/// model error with its untapered gain, then `u` recovered through the
/// field map's inverse.
pub fn rlenkf_update(
    ens: &Ensemble,
    predictions: &DMatrix<f64>,
    perturbed: &DMatrix<f64>,
    r: &NoiseCovariance,
    mu: f64,
    loc: Localization<'_>,
) -> Result<Ensemble> {
    ensure_dims(loc.taper.cells() == loc.field_map.num_cells() && loc.taper.kappa() == predictions.nrows(), || {
        format!("taper is {}x{}", loc.taper.cells(), loc.taper.kappa())
    })?;
    let log_k = loc.field_map.to_field(&ens.param_block());
    let q = ens.error_block();
    let (b_gg, b_kg) = empirical_covariances(&log_k, predictions)?;
    let (_, b_qg) = empirical_covariances(&q, predictions)?;
    let x = kalman_increments(&b_gg, r, mu, perturbed, predictions)?;
    let gain = b_kg.component_mul(loc.taper.entries());
    let log_k = log_k + gain * &x;
    let q = q + b_qg * &x;
    Ensemble::from_blocks(&loc.field_map.from_field(&log_k), &q)
}

/// `y_obs + η_i` with `η_i ~ N(0, R)`, one stream per member.
pub fn perturbed_observations(obs: &ObservationSet, size: usize, seed: u64) -> Result<DMatrix<f64>> {
    let kappa = obs.len();
    let chol = obs
        .noise_cov
        .to_matrix()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("observation noise covariance".into()))?;
    let l = chol.l();
    let mut out = DMatrix::zeros(kappa, size);
    for i in 0..size {
        let mut rng = stream(seed, Purpose::PerturbedObservations, 0, i as u64);
        let z = DVector::from_fn(kappa, |_, _| StandardNormal.sample(&mut rng));
        let eta = &l * z;
        for k in 0..kappa {
            out[(k, i)] = obs.values[k] + eta[k];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnkfRecord {
    pub iteration: usize,
    /// Regularization used for the update after this sweep; `None` on the
    /// sweep that met the stopping rule.
    pub mu: Option<f64>,
    pub innovation_norm: f64,
    /// Right-hand side `||R^{-1/2} η|| / Ω` of the stopping rule.
    pub threshold: f64,
    pub failures: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnkfDiagnostics {
    /// Number of ensemble evaluation sweeps.
    pub iterations: usize,
    pub model_evaluations: usize,
    pub trace: Vec<EnkfRecord>,
    /// `||R^{-1/2}(y_obs - g(mean v))||` from the closing evaluation.
    pub final_mean_misfit: f64,
    /// Whether the discrepancy principle was met.
    pub converged: bool,
}

impl EnkfDiagnostics {
    pub const CSV_HEADER: &'static str = "iteration,mu,innovation_norm,threshold,failures";

    pub fn mu_trace(&self) -> Vec<f64> {
        self.trace.iter().filter_map(|r| r.mu).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.trace {
            let mu = r.mu.map(|m| format!("{m:.17e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:.17e},{:.17e},{}", r.iteration, mu, r.innovation_norm, r.threshold, r.failures);
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

#[derive(Debug, Clone)]
pub struct EnkfOutput {
    pub ensemble: Ensemble,
    pub diagnostics: EnkfDiagnostics,
}

/// Iterates evaluate, stop check, `μ` selection and update until the
/// discrepancy principle holds, then evaluates the model once more at the
/// ensemble mean, for `T M + 1` evaluations in total.
///
/// `noise` is the realized observation noise entering the stopping rule.
pub fn renkf_assimilate<G: ForwardModel + ?Sized>(
    initial: &Ensemble,
    model: &G,
    obs: &ObservationSet,
    noise: &[f64],
    cfg: &RenkfConfig,
    localization: Option<Localization<'_>>,
) -> Result<EnkfOutput> {
    cfg.validate()?;
    ensure_dims(noise.len() == obs.len(), || format!("{} noise values for {} observations", noise.len(), obs.len()))?;
    ensure_dims(model.obs_dim() == obs.len(), || {
        format!("model predicts {} observations, {} given", model.obs_dim(), obs.len())
    })?;
    ensure_dims(initial.param_dim() == model.param_dim() && initial.error_dim() == model.error_dim(), || {
        "ensemble blocks do not match the model".into()
    })?;
    let size = initial.size();
    let perturbed = perturbed_observations(obs, size, cfg.seed)?;
    let threshold = obs.noise_cov.whitened_norm(&DVector::from_column_slice(noise)) / cfg.omega;
    let y = obs.vector();
    let mut ens = initial.clone();
    let mut diag = EnkfDiagnostics::default();

    loop {
        if diag.iterations >= cfg.max_iterations {
            if !cfg.abort_on_cap {
                break;
            }
            let mut csv = diag.to_csv();
            csv.push_str(&format!("# aborted after {} sweeps\n", diag.iterations));
            return Err(Error::Aborted {
                iterations: diag.iterations,
                reason: "discrepancy principle not met".into(),
                partial_csv: csv,
            });
        }
        let start = Instant::now();
        let evals = evaluate_ensemble(model, &ens);
        diag.model_evaluations += size;
        diag.iterations += 1;
        if evals.failures() > 0 {
            return Err(Error::Model(format!("{} member evaluations failed", evals.failures())));
        }
        let innovation = &y - ensemble_mean(&evals.predictions);
        let innovation_norm = obs.noise_cov.whitened_norm(&innovation);
        let mut record = EnkfRecord {
            iteration: diag.iterations,
            mu: None,
            innovation_norm,
            threshold,
            failures: 0,
            wall_time: 0.0,
        };
        if innovation_norm <= threshold {
            diag.converged = true;
            record.wall_time = start.elapsed().as_secs_f64();
            diag.trace.push(record);
            break;
        }
        let (b_gg, _) = empirical_covariances(ens.data(), &evals.predictions)?;
        let mu = select_mu(&b_gg, &obs.noise_cov, &innovation, cfg.omega, cfg.mu0, cfg.max_doublings)?;
        ens = match localization {
            None => renkf_update(&ens, &evals.predictions, &perturbed, &obs.noise_cov, mu)?,
            Some(loc) => rlenkf_update(&ens, &evals.predictions, &perturbed, &obs.noise_cov, mu, loc)?,
        };
        record.mu = Some(mu);
        record.wall_time = start.elapsed().as_secs_f64();
        diag.trace.push(record);
    }

    let mean = ens.mean();
    let n = ens.param_dim();
    let g_mean = model.evaluate(&mean.as_slice()[..n], &mean.as_slice()[n..])?;
    diag.model_evaluations += 1;
    diag.final_mean_misfit = obs.noise_cov.whitened_norm(&(&y - DVector::from_vec(g_mean)));

    if diag.model_evaluations != diag.iterations * size + 1 {
        return Err(Error::Model(format!("made {} evaluations, expected {}", diag.model_evaluations, diag.iterations * size + 1)));
    }
    Ok(EnkfOutput { ensemble: ens, diagnostics: diag })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_member_covariances() {
        let v = DMatrix::from_row_slice(1, 2, &[0.0, 2.0]);
        let g = DMatrix::from_row_slice(1, 2, &[0.0, 2.0]);
        let (b_gg, b_vg) = empirical_covariances(&v, &g).unwrap();
        assert_eq!(b_gg[(0, 0)], 2.0);
        assert_eq!(b_vg[(0, 0)], 2.0);
        let (z, zc) = empirical_covariances(&v, &DMatrix::from_element(3, 2, 1.5)).unwrap();
        assert_eq!(z.amax(), 0.0);
        assert_eq!(zc.amax(), 0.0);
        assert!(empirical_covariances(&DMatrix::zeros(1, 1), &DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn covariance_is_psd() {
        let v = DMatrix::from_fn(3, 7, |r, c| ((r * 7 + c) as f64 * 1.3).sin());
        let g = DMatrix::from_fn(5, 7, |r, c| ((r * 3 + c * c) as f64 * 0.7).cos());
        let (b_gg, _) = empirical_covariances(&v, &g).unwrap();
        assert!((&b_gg - b_gg.transpose()).amax() == 0.0);
        assert!(b_gg.symmetric_eigenvalues().iter().all(|e| *e >= -1e-10));
    }

    #[test]
    fn mu_with_zero_covariance_is_mu0() {
        let r = NoiseCovariance::Diagonal(vec![0.5, 2.0]);
        let d = DVector::from_vec(vec![1.0, -3.0]);
        let mu = select_mu(&DMatrix::zeros(2, 2), &r, &d, 0.7, 0.25, 64).unwrap();
        assert_eq!(mu, 0.25);
    }

    #[test]
    fn mu_with_zero_innovation_is_mu0() {
        let r = NoiseCovariance::Diagonal(vec![1.0]);
        let mu = select_mu(&DMatrix::from_element(1, 1, 5.0), &r, &DVector::zeros(1), 0.7, 1.0, 64).unwrap();
        assert_eq!(mu, 1.0);
    }

    #[test]
    fn scalar_mu() {
        // μ/(1+μ) >= 0.7 first holds at μ = 4 in 1, 2, 4, ...
        let r = NoiseCovariance::Diagonal(vec![1.0]);
        let mu = select_mu(&DMatrix::from_element(1, 1, 1.0), &r, &DVector::from_element(1, 1.0), 0.7, 1.0, 64).unwrap();
        assert_eq!(mu, 4.0);
        let err = select_mu(&DMatrix::from_element(1, 1, 1e30), &r, &DVector::from_element(1, 1.0), 0.7, 1.0, 3);
        assert!(matches!(err, Err(Error::RegularizationFailed { doublings: 3, .. })));
    }

    #[test]
    fn stopping_rule() {
        let r = NoiseCovariance::Diagonal(vec![1.0, 1.0]);
        assert!(discrepancy_stop(&DVector::zeros(2), &r, &[0.0, 0.0], 0.7));
        assert!(discrepancy_stop(&DVector::from_vec(vec![3.0, 4.0]), &r, &[0.0, 5.0], 0.7));
        assert!(!discrepancy_stop(&DVector::from_vec(vec![0.1, 0.0]), &r, &[0.0, 0.0], 0.7));
    }

    #[test]
    fn zero_innovation_update_is_identity() {
        let ens = Ensemble::new(DMatrix::from_fn(2, 4, |r, c| (r + 2 * c) as f64 * 0.3 + (c * c) as f64 * 0.01), 1, 1).unwrap();
        let preds = DMatrix::from_fn(1, 4, |_, c| c as f64);
        let r = NoiseCovariance::Diagonal(vec![0.1]);
        let out = renkf_update(&ens, &preds, &preds, &r, 2.0).unwrap();
        assert_eq!(out.data(), ens.data());
    }

    #[test]
    fn cap_aborts_or_returns() {
        use crate::models::ToyModel;
        let obs = ObservationSet::with_isotropic_noise(vec![1.8, 1.8], None, 1e-3).unwrap();
        // members far from the peak cannot reach the data: the toy map is flat there
        let ens = Ensemble::new(DMatrix::from_fn(4, 6, |r, c| if r < 2 { 5.0 + 0.1 * c as f64 + 0.05 * r as f64 } else { 1.0 }), 2, 2).unwrap();
        let mut cfg = RenkfConfig::new(1);
        cfg.max_iterations = 3;
        let noise = [0.0316, 0.0316];
        match renkf_assimilate(&ens, &ToyModel, &obs, &noise, &cfg, None) {
            Err(Error::Aborted { iterations: 3, partial_csv, .. }) => assert_eq!(partial_csv.lines().count(), 5),
            other => panic!("expected abort, got {other:?}"),
        }
        cfg.abort_on_cap = false;
        let out = renkf_assimilate(&ens, &ToyModel, &obs, &noise, &cfg, None).unwrap();
        assert!(!out.diagnostics.converged);
        assert_eq!(out.diagnostics.model_evaluations, 3 * 6 + 1);
    }
}

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::ensemble::{Ensemble, Marginal, PriorSpec};
use crate::error::{ensure_dims, Error, Result};
use crate::rng::{stream, Purpose};

/// How uniform-prior coordinates move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UniformMove {
    /// `v + ξ`, `ξ ~ U[a-b, b-a]`, projected back onto `[a, b]`.
    #[default]
    Projected,
    /// `v + ξ`, `ξ ~ U[-β(b-a), β(b-a)]`, reflected at the bounds. Symmetric,
    /// so the chain leaves the uniform prior invariant.
    Reflected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationConfig {
    /// pcn step size in `(0, 1)`.
    pub beta: f64,
    /// Inner iterations per tempering step.
    pub tau_max: usize,
    pub prior: PriorSpec,
    pub uniform_move: UniformMove,
}

impl MutationConfig {
    pub fn new(beta: f64, tau_max: usize, prior: PriorSpec) -> Result<Self> {
        let cfg = Self { beta, tau_max, prior, uniform_move: UniformMove::Projected };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidInput(format!("pcn step {} outside [0, 1)", self.beta)));
        }
        if self.tau_max == 0 {
            return Err(Error::InvalidInput("tau_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MutationOutcome {
    pub ensemble: Ensemble,
    /// Misfits of the returned members.
    pub misfits: Vec<f64>,
    /// Accepted over proposed moves; 1 when nothing was proposed.
    pub acceptance_rate: f64,
    pub evaluations: usize,
    pub failures: usize,
}

/// One proposal for a single coordinate.
pub fn propose<R: Rng + ?Sized>(v: f64, marginal: &Marginal, beta: f64, rng: &mut R) -> f64 {
    propose_with(v, marginal, beta, UniformMove::Projected, rng)
}

pub fn propose_with<R: Rng + ?Sized>(v: f64, marginal: &Marginal, beta: f64, uniform: UniformMove, rng: &mut R) -> f64 {
    match *marginal {
        Marginal::Gaussian { mean, std } => {
            let z = (v - mean) / std;
            let xi: f64 = StandardNormal.sample(rng);
            mean + std * ((1.0 - beta * beta).sqrt() * z + beta * xi)
        }
        Marginal::Uniform { a, b } => match uniform {
            UniformMove::Projected => {
                let xi = rng.gen_range((a - b)..=(b - a));
                (v + xi).clamp(a, b)
            }
            UniformMove::Reflected => {
                let h = beta * (b - a);
                let mut x = v + rng.gen_range(-h..=h);
                while !(a..=b).contains(&x) {
                    x = if x < a { 2.0 * a - x } else { 2.0 * b - x };
                }
                x
            }
        },
    }
}

/// pcn-MCMC rejuvenation targeting `h(v)^φ π(v)`.
///
/// `misfit(v)` returns `(g - y)' R^{-1} (g - y)` for a full member. With
/// `baseline = None` the first inner iteration evaluates the incoming
/// members and the remaining `τ_max - 1` propose; otherwise all `τ_max`
/// iterations propose. Either way `τ_max M` evaluations are made.
pub fn mutate<F>(
    ens: &Ensemble,
    phi: f64,
    cfg: &MutationConfig,
    misfit: F,
    baseline: Option<&[f64]>,
    seed: u64,
    iteration: u64,
) -> Result<MutationOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    mutate_with_purpose(ens, phi, cfg, misfit, baseline, seed, iteration, Purpose::Mutation)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn mutate_with_purpose<F>(
    ens: &Ensemble,
    phi: f64,
    cfg: &MutationConfig,
    misfit: F,
    baseline: Option<&[f64]>,
    seed: u64,
    iteration: u64,
    purpose: Purpose,
) -> Result<MutationOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::InvalidInput(format!("temperature {phi} outside (0, 1]")));
    }
    ensure_dims(cfg.prior.dim() == ens.dim(), || {
        format!("prior has {} coordinates, members {}", cfg.prior.dim(), ens.dim())
    })?;
    if let Some(b) = baseline {
        ensure_dims(b.len() == ens.size(), || format!("{} baseline misfits for {} members", b.len(), ens.size()))?;
    }
    let eval = |v: &[f64]| match misfit(v) {
        Ok(m) if !m.is_nan() => Some(m),
        _ => None,
    };
    struct Chain {
        state: Vec<f64>,
        misfit: f64,
        accepted: usize,
        proposed: usize,
        failures: usize,
        evaluations: usize,
    }
    let chains: Vec<Chain> = (0..ens.size())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, purpose, iteration, i as u64);
            let mut state = ens.member(i).to_vec();
            let mut evaluations = 0;
            let mut failures = 0;
            let (mut current, sweeps) = match baseline {
                Some(b) => (b[i], cfg.tau_max),
                None => {
                    evaluations += 1;
                    let m = eval(&state).unwrap_or_else(|| {
                        failures += 1;
                        f64::INFINITY
                    });
                    (m, cfg.tau_max - 1)
                }
            };
            let mut proposal = vec![0.0; state.len()];
            let mut accepted = 0;
            for _ in 0..sweeps {
                for (k, marg) in cfg.prior.marginals.iter().enumerate() {
                    proposal[k] = propose_with(state[k], marg, cfg.beta, cfg.uniform_move, &mut rng);
                }
                evaluations += 1;
                let u: f64 = rng.gen();
                match eval(&proposal) {
                    Some(m) => {
                        let log_ratio = -0.5 * phi * (m - current);
                        // an infinite current misfit accepts any finite proposal
                        let accept = m <= current || (log_ratio.is_finite() && u.ln() < log_ratio);
                        if accept {
                            state.copy_from_slice(&proposal);
                            current = m;
                            accepted += 1;
                        }
                    }
                    None => failures += 1,
                }
            }
            Chain { state, misfit: current, accepted, proposed: sweeps, failures, evaluations }
        })
        .collect();

    let mut data = ens.data().clone();
    let mut misfits = Vec::with_capacity(chains.len());
    let (mut accepted, mut proposed, mut failures, mut evaluations) = (0, 0, 0, 0);
    for (i, c) in chains.into_iter().enumerate() {
        data.column_mut(i).copy_from_slice(&c.state);
        misfits.push(c.misfit);
        accepted += c.accepted;
        proposed += c.proposed;
        failures += c.failures;
        evaluations += c.evaluations;
    }
    let acceptance_rate = if proposed == 0 { 1.0 } else { accepted as f64 / proposed as f64 };
    Ok(MutationOutcome {
        ensemble: Ensemble::new(data, ens.param_dim(), ens.error_dim())?,
        misfits,
        acceptance_rate,
        evaluations,
        failures,
    })
}

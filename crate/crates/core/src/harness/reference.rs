use nalgebra::DMatrix;

use super::metrics::Histogram;
use crate::ensemble::{Ensemble, PriorSpec};
use crate::error::{Error, Result};
use crate::models::toy_forward;
use crate::rng::{stream, Purpose};
use crate::tetpf::{mutate_with_purpose, MutationConfig, UniformMove};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub chains: usize,
    /// Steps per chain after initialization.
    pub length: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct McmcOutput {
    /// Pooled thinned samples, one per column.
    pub samples: Ensemble,
    pub acceptance_rate: f64,
    pub evaluations: usize,
    /// Acceptance rate of each thinning block, pooled over chains.
    pub block_acceptance: Vec<f64>,
    /// Set when the acceptance rate falls outside `[0.05, 0.6]`.
    pub warning: Option<String>,
}

/// Independent pcn-MCMC chains targeting `h(v) π(v)`, built from the
/// mutation kernel at temperature one. Chain `c` starts from a prior draw.
/// Uniform coordinates take reflected steps so the prior stays invariant.
pub fn pcn_mcmc_reference<F>(misfit: F, prior: &PriorSpec, n: usize, cfg: &ChainConfig, seed: u64) -> Result<McmcOutput>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if cfg.chains == 0 || cfg.thinning == 0 || cfg.length <= cfg.burn_in {
        return Err(Error::InvalidInput(format!("invalid chain configuration {cfg:?}")));
    }
    let d = prior.dim();
    let mut data = DMatrix::zeros(d, cfg.chains);
    for c in 0..cfg.chains {
        let mut rng = stream(seed, Purpose::Chain, 0, c as u64);
        for (k, m) in prior.marginals.iter().enumerate() {
            data[(k, c)] = m.sample(&mut rng);
        }
    }
    let mut ens = Ensemble::new(data, n, d - n)?;
    let mut misfits: Vec<f64> = (0..cfg.chains)
        .map(|c| misfit(ens.member(c)).unwrap_or(f64::INFINITY))
        .collect();
    let mut evaluations = cfg.chains;
    let kernel = MutationConfig { uniform_move: UniformMove::Reflected, ..MutationConfig::new(cfg.beta, cfg.thinning, prior.clone())? };
    let blocks = cfg.length / cfg.thinning;
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let (mut accepted, mut proposed) = (0.0, 0usize);
    let mut block_acceptance = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let out = mutate_with_purpose(&ens, 1.0, &kernel, &misfit, Some(&misfits), seed, b as u64 + 1, Purpose::Chain)?;
        evaluations += out.evaluations;
        accepted += out.acceptance_rate * out.evaluations as f64;
        proposed += out.evaluations;
        block_acceptance.push(out.acceptance_rate);
        ens = out.ensemble;
        misfits = out.misfits;
        if (b + 1) * cfg.thinning > cfg.burn_in {
            for c in 0..cfg.chains {
                kept.push(ens.member(c).to_vec());
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidInput("no samples survive burn-in".into()));
    }
    let mut samples = DMatrix::zeros(d, kept.len());
    for (j, s) in kept.iter().enumerate() {
        samples.column_mut(j).copy_from_slice(s);
    }
    let acceptance_rate = accepted / proposed.max(1) as f64;
    let warning = if !(0.05..=0.6).contains(&acceptance_rate) {
        Some(format!("reference chain acceptance rate {acceptance_rate:.3} outside [0.05, 0.6]"))
    } else {
        None
    };
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(McmcOutput { samples: Ensemble::new(samples, n, d - n)?, acceptance_rate, evaluations, block_acceptance, warning })
}

/// Posterior of one toy component on a tensor grid of cell midpoints.
#[derive(Debug, Clone)]
pub struct BayesGrid {
    pub u_range: (f64, f64),
    pub q_range: (f64, f64),
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    /// Normalized joint density, `density[(a, b)]` at `(u[a], q[b])`.
    pub density: DMatrix<f64>,
    pub u_marginal: Vec<f64>,
    pub q_marginal: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyPosteriorSpec {
    pub y: f64,
    pub noise_variance: f64,
    pub u_mean: f64,
    pub u_std: f64,
    pub q_mean: f64,
    pub q_std: f64,
}

impl ToyPosteriorSpec {
    pub fn standard() -> Self {
        Self { y: 1.8, noise_variance: 1e-3, u_mean: 2.4, u_std: 1.0, q_mean: 1.0, q_std: 0.1 }
    }
}

/// Tensor-product quadrature of prior times likelihood for one component
/// of the toy problem over the prior `±4σ` box.
pub fn bayes_grid_oracle(spec: &ToyPosteriorSpec, resolution: usize) -> Result<BayesGrid> {
    if resolution < 100 {
        return Err(Error::InvalidInput(format!("resolution {resolution} below 100 points per axis")));
    }
    let u_range = (spec.u_mean - 4.0 * spec.u_std, spec.u_mean + 4.0 * spec.u_std);
    let q_range = (spec.q_mean - 4.0 * spec.q_std, spec.q_mean + 4.0 * spec.q_std);
    let mid = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * (k as f64 + 0.5) / resolution as f64;
    let u: Vec<f64> = (0..resolution).map(|k| mid(u_range, k)).collect();
    let q: Vec<f64> = (0..resolution).map(|k| mid(q_range, k)).collect();
    let du = (u_range.1 - u_range.0) / resolution as f64;
    let dq = (q_range.1 - q_range.0) / resolution as f64;
    let mut logp = DMatrix::from_fn(resolution, resolution, |a, b| {
        let g = toy_forward(&[u[a]], &[q[b]]).expect("scalar input")[0];
        -0.5 * ((u[a] - spec.u_mean) / spec.u_std).powi(2)
            - 0.5 * ((q[b] - spec.q_mean) / spec.q_std).powi(2)
            - 0.5 * (g - spec.y).powi(2) / spec.noise_variance
    });
    let top = logp.max();
    logp.apply(|x| *x = (*x - top).exp());
    let total = logp.sum() * du * dq;
    let density = logp / total;
    let u_marginal = (0..resolution).map(|a| density.row(a).sum() * dq).collect();
    let q_marginal = (0..resolution).map(|b| density.column(b).sum() * du).collect();
    Ok(BayesGrid { u_range, q_range, u, q, density, u_marginal, q_marginal })
}

impl BayesGrid {
    fn binned(marginal: &[f64], range: (f64, f64), bins: usize) -> Result<Histogram> {
        let res = marginal.len();
        if res % bins != 0 {
            return Err(Error::InvalidInput(format!("resolution {res} is not a multiple of {bins} bins")));
        }
        let per = res / bins;
        let cell = (range.1 - range.0) / res as f64;
        let masses = marginal.chunks(per).map(|c| c.iter().sum::<f64>() * cell).collect();
        Ok(Histogram::from_masses(range.0, range.1, masses))
    }

    pub fn u_histogram(&self, bins: usize) -> Result<Histogram> {
        Self::binned(&self.u_marginal, self.u_range, bins)
    }

    pub fn q_histogram(&self, bins: usize) -> Result<Histogram> {
        Self::binned(&self.q_marginal, self.q_range, bins)
    }

    pub fn total_mass(&self) -> f64 {
        let du = (self.u_range.1 - self.u_range.0) / self.u.len() as f64;
        let dq = (self.q_range.1 - self.q_range.0) / self.q.len() as f64;
        self.density.sum() * du * dq
    }
}

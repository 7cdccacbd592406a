//! pcn-MCMC chains on the toy problem checked against the quadrature
//! posterior of a single component.

use ensemble_da::harness::{bayes_grid_oracle, pcn_mcmc_reference, tv_distance, ChainConfig, Histogram, ToyPosteriorSpec};
use ensemble_da::{Marginal, PriorSpec};

fn main() -> ensemble_da::Result<()> {
    let spec = ToyPosteriorSpec::standard();
    let prior = PriorSpec::new(vec![
        Marginal::Gaussian { mean: spec.u_mean, std: spec.u_std },
        Marginal::Gaussian { mean: spec.q_mean, std: spec.q_std },
    ])?;
    let misfit = |v: &[f64]| {
        let g = ensemble_da::models::toy_forward(&v[..1], &v[1..])?;
        Ok((g[0] - spec.y).powi(2) / spec.noise_variance)
    };
    let cfg = ChainConfig { chains: 16, length: 40_000, burn_in: 4_000, thinning: 20, beta: 0.3 };
    let out = pcn_mcmc_reference(misfit, &prior, 1, &cfg, 5)?;
    let grid = bayes_grid_oracle(&spec, 1000)?;
    let u: Vec<f64> = out.samples.data().row(0).iter().copied().collect();
    let (lo, hi) = grid.u_range;
    let tv = tv_distance(&Histogram::new(&u, lo, hi, 50)?, &grid.u_histogram(50)?)?;
    println!(
        "{} samples, acceptance {:.3}, {} evaluations, TV(u) to quadrature {tv:.3}",
        out.samples.size(),
        out.acceptance_rate,
        out.evaluations
    );
    Ok(())
}

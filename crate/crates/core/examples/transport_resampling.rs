//! Deterministic resampling of a weighted Gaussian cloud: the weighted mean
//! is kept exactly while the spread contracts toward the weighted spread.

use ensemble_da::ensemble::{ess, tempered_weights};
use ensemble_da::transport::{solve_ot, transform, CostMatrix};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> ensemble_da::Result<()> {
    let size = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let members = DMatrix::from_fn(2, size, |_, _| StandardNormal.sample(&mut rng));

    // likelihood of observing 0.8 in the first coordinate with variance 0.25
    let misfits: Vec<f64> = members.row(0).iter().map(|x: &f64| (x - 0.8).powi(2) / 0.25).collect();
    let w = tempered_weights(&misfits, 1.0)?;
    println!("ESS before resampling: {:.1} of {size}", ess(&w));

    let plan = solve_ot(&CostMatrix::squared_euclidean(&members), &w)?;
    let out = transform(&members, &plan)?;
    for r in 0..2 {
        let weighted: f64 = (0..size).map(|i| w.as_slice()[i] * members[(r, i)]).sum();
        let after = out.row(r).mean();
        let spread = out.row(r).variance().sqrt();
        println!("coordinate {r}: weighted mean {weighted:.4}, resampled mean {after:.4}, resampled std {spread:.3}");
    }
    println!("plan marginal error {:.2e}, transport cost {:.4}", plan.marginal_error(), plan.cost(&CostMatrix::squared_euclidean(&members)));
    Ok(())
}

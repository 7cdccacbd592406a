//! Entropic transport against the exact plan: cost gap and marginal error
//! as the regularization shrinks.

use ensemble_da::ensemble::WeightVector;
use ensemble_da::transport::{solve_ot, solve_ot_entropic, CostMatrix, SinkhornConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ensemble_da::Result<()> {
    let size = 60;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let members = DMatrix::from_fn(3, size, |_, _| rng.gen_range(-1.0..1.0));
    let cost = CostMatrix::squared_euclidean(&members);
    let h: Vec<f64> = (0..size).map(|_| rng.gen::<f64>().powi(3)).collect();
    let w = WeightVector::from_unnormalized(&h)?;

    let exact = solve_ot(&cost, &w)?.cost(&cost);
    println!("exact cost {exact:.6}");
    for eps in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3] {
        let cfg = SinkhornConfig { epsilon: eps, max_iter: 50_000, ..SinkhornConfig::default() };
        match solve_ot_entropic(&cost, &w, &cfg) {
            Ok(plan) => println!(
                "epsilon {eps:.0e}: cost {:.6} (gap {:.2e}), marginal error {:.1e}",
                plan.cost(&cost),
                plan.cost(&cost) - exact,
                plan.marginal_error()
            ),
            Err(e) => println!("epsilon {eps:.0e}: {e}"),
        }
    }
    Ok(())
}

//! Solves the aquifer benchmark for one random permeability field and
//! prints the observed pressures and the global mass balance.

use std::time::Instant;

use ensemble_da::models::{build_kl_basis, DarcyProblem, KernelMode, ObservationFunctionalSpec, ObservationOperator};
use ensemble_da::rng::{stream, Purpose};
use ensemble_da::GridSpec;
use rand_distr::{Distribution, StandardNormal};

fn main() -> ensemble_da::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(35);
    let grid = GridSpec::new(n)?;
    let basis = build_kl_basis(&grid, 0.5, 100.min(n * n))?;
    let mut rng = stream(1, Purpose::Test, 0, 0);
    let u: Vec<f64> = (0..basis.m_kl()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let log_k = basis.sample_log_permeability(&u)?;
    let k: Vec<f64> = log_k.iter().map(|x| x.exp()).collect();

    let problem = DarcyProblem::benchmark(grid);
    let start = Instant::now();
    let reps = 20;
    let mut p = Vec::new();
    for _ in 0..reps {
        p = problem.solve(&k, 0.25)?;
    }
    let per_solve = start.elapsed().as_secs_f64() / reps as f64;

    let spec = ObservationFunctionalSpec::new(0.01, grid.well_lattice(7), KernelMode::DiscreteNormalized)?;
    let obs = ObservationOperator::new(grid, spec)?.observe(&p)?;
    let balance = problem.flux_balance(&k, &p, 0.25);

    println!("grid {n}x{n}, {:.3} ms per solve", per_solve * 1e3);
    println!("pressure range [{:.3}, {:.3}]", p.iter().cloned().fold(f64::INFINITY, f64::min), p.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    println!("relative mass imbalance {:.2e}", balance.relative_imbalance());
    for (k, row) in obs.chunks(7).enumerate() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:8.2}")).collect();
        println!("wells row {k}: {}", line.join(" "));
    }
    Ok(())
}

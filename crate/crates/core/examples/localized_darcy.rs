//! Localized tempered ETPF against the localized regularized EnKF on a small
//! Darcy problem sharing one synthetic truth.

use std::sync::Arc;

use ensemble_da::harness::{run_seed, DarcyTruth, ExperimentConfig, ProblemSetup};

fn main() -> ensemble_da::Result<()> {
    let base = "problem = \"darcy\"\nensemble_size = 40\nseeds = [1]\ncoarse_grid = 20\nfine_grid = 40\nm_kl = 30\ntruth_m_kl = 200\nwells_per_side = 4\n";
    let truth_cfg = ExperimentConfig::parse(&format!("{base}method = \"tletpf\"\nr_loc = 1.0"))?;
    let truth = Arc::new(DarcyTruth::generate(&truth_cfg)?);
    for (method, r_loc) in [("tletpf", 1.0), ("rlenkf", 3.0)] {
        let cfg = ExperimentConfig::parse(&format!("{base}method = \"{method}\"\nr_loc = {r_loc}"))?;
        let setup = ProblemSetup::new(&cfg, Some(truth.clone()))?;
        let r = run_seed(&cfg, &setup, 1, None)?;
        let q = r.q_samples(0);
        let q_mean = q.iter().sum::<f64>() / q.len() as f64;
        println!(
            "{method}: T = {}, {} evaluations, mean q = {q_mean:.3}, acceptance {}",
            r.iterations,
            r.model_evaluations,
            r.acceptance_rate.map(|a| format!("{a:.2}")).unwrap_or_else(|| "-".into())
        );
    }
    Ok(())
}

//! Tempered ETPF on the toy problem compared with the quadrature posterior:
//! total-variation distance of the `u1` and `q2` marginals and the
//! locations of the histogram peaks.

use ensemble_da::harness::{bayes_grid_oracle, prominent_maxima, run_seed, tv_distance, ExperimentConfig, ProblemSetup, ToyPosteriorSpec};

fn main() -> ensemble_da::Result<()> {
    let size: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let cfg = ExperimentConfig::parse(&format!(
        "problem = \"toy\"\nmethod = \"tetpf\"\nensemble_size = {size}\nseeds = [1, 2, 3]"
    ))?;
    let setup = ProblemSetup::new(&cfg, None)?;
    let oracle = bayes_grid_oracle(&ToyPosteriorSpec::standard(), cfg.oracle_resolution)?;
    let (u_ref, q_ref) = (oracle.u_histogram(cfg.histogram_bins)?, oracle.q_histogram(cfg.histogram_bins)?);

    for &seed in &cfg.seeds {
        let r = run_seed(&cfg, &setup, seed, None)?;
        let hists = r.histograms(&setup, cfg.histogram_bins)?;
        let u1 = &hists[0].1;
        let q2 = &hists[3].1;
        let top = u1.counts.iter().cloned().fold(0.0, f64::max);
        let peaks: Vec<String> = prominent_maxima(&u1.counts, 0.1 * top).iter().map(|b| format!("{:.2}", u1.center(*b))).collect();
        println!(
            "seed {seed}: T = {}, TV(u1) = {:.3}, TV(q2) = {:.3}, u1 peaks at [{}]",
            r.iterations,
            tv_distance(u1, &u_ref)?,
            tv_distance(q2, &q_ref)?,
            peaks.join(", ")
        );
    }
    Ok(())
}

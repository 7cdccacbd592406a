use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use ensemble_da::harness::output::{histogram_csv, write_json};
use ensemble_da::harness::{
    aggregate_dir, bayes_grid_oracle, darcy_reference, report, run_experiment, write_run, ExperimentConfig, FieldSummary, Method,
    ProblemKind, ProblemSetup, ToyPosteriorSpec,
};
use ensemble_da::Result;

#[derive(Parser)]
#[command(name = "ensemble-da", version, about = "Tempered ensemble transform particle filters and regularized EnKF experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config.
    Run {
        config: PathBuf,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Reference posterior: quadrature for the toy problem, pcn-MCMC for Darcy.
    Oracle {
        config: PathBuf,
        /// Chain seed (Darcy).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarize every rmse.csv below a directory into summary.csv and table1.csv.
    Aggregate { dir: PathBuf },
    /// Print the aggregated results below a directory.
    Report { dir: PathBuf },
}

fn output_dir(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results").join(&cfg.name))
}

#[derive(Serialize)]
struct ReferenceSidecar {
    config_hash: String,
    problem_hash: String,
    seed: u64,
    samples: usize,
    acceptance_rate: f64,
    model_evaluations: usize,
    warning: Option<String>,
}

/// Writes the chain output and returns the reference fields.
fn compute_reference(cfg: &ExperimentConfig, setup: &ProblemSetup, dir: &Path) -> Result<FieldSummary> {
    log::info!("running {} reference chains of length {}", cfg.mcmc_chains, cfg.mcmc_length);
    let (out, fields) = darcy_reference(cfg, setup)?;
    let darcy = setup.darcy.as_ref().expect("Darcy setup");
    fs::create_dir_all(dir)?;
    fs::write(dir.join("reference_fields.csv"), fields.to_csv(darcy)?)?;
    let n = out.samples.param_dim();
    let q: Vec<f64> = out.samples.data().row(n).iter().copied().collect();
    let (lo, hi) = setup.prior.marginals[n].plot_range();
    let h = ensemble_da::harness::Histogram::new(&q, lo, hi, cfg.histogram_bins)?;
    fs::write(dir.join("reference_q.csv"), histogram_csv(&[(cfg.mcmc_seed, "q1".into(), h)]))?;
    let mut samples = String::from("sample,q\n");
    for (i, v) in q.iter().enumerate() {
        samples.push_str(&format!("{i},{v:.17e}\n"));
    }
    fs::write(dir.join("reference_q_samples.csv"), samples)?;
    write_json(
        &dir.join("reference.json"),
        &ReferenceSidecar {
            config_hash: cfg.hash(),
            problem_hash: cfg.problem_hash(),
            seed: cfg.mcmc_seed,
            samples: out.samples.size(),
            acceptance_rate: out.acceptance_rate,
            model_evaluations: out.evaluations,
            warning: out.warning,
        },
    )?;
    Ok(fields)
}

fn load_reference(cfg: &ExperimentConfig, setup: &ProblemSetup, dir: &Path) -> Result<Option<FieldSummary>> {
    if setup.darcy.is_none() || cfg.method == Method::Mcmc {
        return Ok(None);
    }
    // a configured reference path doubles as the cache location
    let (cache_dir, cached) = match &cfg.reference {
        Some(path) => (path.parent().map(Path::to_path_buf).unwrap_or_default(), path.clone()),
        None => (dir.to_path_buf(), dir.join("reference_fields.csv")),
    };
    let sidecar = fs::read_to_string(cache_dir.join("reference.json")).ok();
    let fresh = sidecar
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .is_some_and(|v| v["problem_hash"] == serde_json::Value::String(cfg.problem_hash()));
    if fresh && cached.exists() {
        return FieldSummary::from_csv(&fs::read_to_string(cached)?).map(Some);
    }
    if cfg.reference.is_some() && cached.exists() {
        log::warn!("{} does not match this problem; recomputing", cached.display());
    }
    compute_reference(cfg, setup, &cache_dir).map(Some)
}

fn run(config: &Path, seed: Option<u64>, output: Option<PathBuf>) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let dir = output_dir(&cfg, output);
    fs::create_dir_all(&dir)?;
    let setup = ProblemSetup::new(&cfg, None)?;
    let reference = load_reference(&cfg, &setup, &dir)?;
    log::info!("{}: {} on {} seeds", cfg.name, cfg.method.name(), cfg.seeds.len());
    let results = run_experiment(&cfg, &setup, reference.as_ref());
    let failed = write_run(&dir, &cfg, &setup, &results)?;
    for (seed, r) in &results {
        if let Ok(r) = r {
            println!(
                "seed {seed}: T = {}, evaluations = {} (expected {}){}",
                r.iterations,
                r.model_evaluations,
                r.expected_evaluations,
                r.rmse_pressure.map(|p| format!(", RMSE(P) = {p:.4e}")).unwrap_or_default()
            );
        }
    }
    println!("wrote {}", dir.display());
    Ok(failed == 0)
}

#[derive(Serialize)]
struct OracleSidecar {
    config_hash: String,
    resolution: usize,
    total_mass: f64,
    u_range: (f64, f64),
    q_range: (f64, f64),
}

fn oracle(config: &Path, seed: Option<u64>, output: Option<PathBuf>) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.mcmc_seed = s;
    }
    let dir = output_dir(&cfg, output);
    fs::create_dir_all(&dir)?;
    match cfg.problem {
        ProblemKind::Toy => {
            let spec = ToyPosteriorSpec { y: cfg.toy_observation, noise_variance: cfg.toy_noise_variance, ..ToyPosteriorSpec::standard() };
            let grid = bayes_grid_oracle(&spec, cfg.oracle_resolution)?;
            let (u, q) = (grid.u_histogram(cfg.histogram_bins)?, grid.q_histogram(cfg.histogram_bins)?);
            fs::write(dir.join("posterior_u.csv"), histogram_csv(&[(0, "u1".into(), u.clone()), (0, "u2".into(), u)]))?;
            fs::write(dir.join("posterior_q.csv"), histogram_csv(&[(0, "q1".into(), q.clone()), (0, "q2".into(), q)]))?;
            let mut marg = String::from("index,u,density_u,q,density_q\n");
            for k in 0..grid.u.len() {
                marg.push_str(&format!(
                    "{k},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                    grid.u[k], grid.u_marginal[k], grid.q[k], grid.q_marginal[k]
                ));
            }
            fs::write(dir.join("oracle_marginals.csv"), marg)?;
            write_json(
                &dir.join("oracle.json"),
                &OracleSidecar {
                    config_hash: cfg.hash(),
                    resolution: cfg.oracle_resolution,
                    total_mass: grid.total_mass(),
                    u_range: grid.u_range,
                    q_range: grid.q_range,
                },
            )?;
        }
        ProblemKind::Darcy => {
            let setup = ProblemSetup::new(&cfg, None)?;
            compute_reference(&cfg, &setup, &dir)?;
        }
    }
    println!("wrote {}", dir.display());
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let outcome = match cli.command {
        Command::Run { config, seed, output } => run(&config, seed, output),
        Command::Oracle { config, seed, output } => oracle(&config, seed, output),
        Command::Aggregate { dir } => aggregate_dir(&dir).map(|rows| {
            println!("aggregated {} groups into {}", rows.len(), dir.display());
            true
        }),
        Command::Report { dir } => report(&dir).map(|text| {
            print!("{text}");
            true
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

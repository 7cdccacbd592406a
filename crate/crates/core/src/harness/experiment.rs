use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use super::metrics::Histogram;
use super::problems::{DarcySetup, ProblemSetup};
use super::reference::{pcn_mcmc_reference, ChainConfig, McmcOutput};
use crate::ensemble::{ensemble_mean, ensemble_variance, rmse, Ensemble};
use crate::error::{Error, Result};
use crate::io::{fields_from_csv, fields_to_csv};
use crate::models::FieldMap;
use crate::renkf::{renkf_assimilate, Localization, RenkfConfig};
use crate::tetpf::{member_misfit, tetpf_assimilate, tletpf_assimilate, MutationConfig, TetpfConfig};

/// Per-cell posterior summaries of a Darcy ensemble on the inversion grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSummary {
    pub mean_log_k: Vec<f64>,
    pub var_log_k: Vec<f64>,
    /// Mean of the member pressures, each solved with the member's own `q`.
    pub mean_pressure: Vec<f64>,
}

impl FieldSummary {
    pub fn from_ensemble(setup: &DarcySetup, ens: &Ensemble) -> Result<Self> {
        let log_k = setup.basis().to_field(&ens.param_block());
        let mean_log_k = ensemble_mean(&log_k).as_slice().to_vec();
        let var_log_k = if ens.size() > 1 {
            ensemble_variance(&log_k)?.as_slice().to_vec()
        } else {
            vec![0.0; log_k.nrows()]
        };
        let pressures: Vec<Vec<f64>> = (0..ens.size())
            .into_par_iter()
            .map(|i| setup.model.problem.solve_log_k(log_k.column(i).as_slice(), ens.model_error(i)[0]))
            .collect::<Result<_>>()?;
        let cells = log_k.nrows();
        let mut mean_pressure = vec![0.0; cells];
        for p in &pressures {
            for (acc, v) in mean_pressure.iter_mut().zip(p) {
                *acc += v;
            }
        }
        mean_pressure.iter_mut().for_each(|v| *v /= ens.size() as f64);
        Ok(Self { mean_log_k, var_log_k, mean_pressure })
    }

    pub fn to_csv(&self, setup: &DarcySetup) -> Result<String> {
        fields_to_csv(
            &setup.grid(),
            &[("mean_log_k", &self.mean_log_k), ("var_log_k", &self.var_log_k), ("mean_pressure", &self.mean_pressure)],
        )
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let cols = fields_from_csv(text)?;
        let get = |name: &str| {
            cols.iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::Parse(format!("reference fields lack column {name}")))
        };
        Ok(Self { mean_log_k: get("mean_log_k")?, var_log_k: get("var_log_k")?, mean_pressure: get("mean_pressure")? })
    }
}

/// The outcome of one method on one seed.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config_hash: String,
    pub method: Method,
    pub seed: u64,
    pub ensemble_size: usize,
    /// Tempering iterations, EnKF sweeps or thinning blocks.
    pub iterations: usize,
    pub model_evaluations: usize,
    /// The closed form the count must equal.
    pub expected_evaluations: usize,
    pub diagnostics_csv: String,
    pub timing_csv: String,
    pub acceptance_rate: Option<f64>,
    pub warning: Option<String>,
    pub ensemble: Ensemble,
    pub fields: Option<FieldSummary>,
    pub rmse_log_k: Option<f64>,
    pub rmse_pressure: Option<f64>,
}

impl RunRecord {
    /// Marginal histograms of every coordinate on its prior plot range.
    pub fn histograms(&self, setup: &ProblemSetup, bins: usize) -> Result<Vec<(String, Histogram)>> {
        let n = self.ensemble.param_dim();
        let data = self.ensemble.data();
        setup
            .prior
            .marginals
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let (lo, hi) = m.plot_range();
                let name = if k < n { format!("u{}", k + 1) } else { format!("q{}", k - n + 1) };
                let row: Vec<f64> = data.row(k).iter().copied().collect();
                Ok((name, Histogram::new(&row, lo, hi, bins)?))
            })
            .collect()
    }

    pub fn q_samples(&self, coordinate: usize) -> Vec<f64> {
        let n = self.ensemble.param_dim();
        self.ensemble.data().row(n + coordinate).iter().copied().collect()
    }
}

pub fn expected_evaluations(method: Method, iterations: usize, size: usize, cfg: &ExperimentConfig) -> usize {
    match method {
        Method::Tetpf => iterations * size * (cfg.tau_max + 1),
        Method::Tletpf => iterations * size * (cfg.tau_max + 2),
        Method::Renkf | Method::Rlenkf => iterations * size + 1,
        Method::Mcmc => cfg.mcmc_chains * (1 + (cfg.mcmc_length / cfg.mcmc_thinning) * cfg.mcmc_thinning),
    }
}

pub fn chain_config(cfg: &ExperimentConfig) -> ChainConfig {
    ChainConfig {
        chains: cfg.mcmc_chains,
        length: cfg.mcmc_length,
        burn_in: cfg.mcmc_burn_in,
        thinning: cfg.mcmc_thinning,
        beta: cfg.chain_beta(),
    }
}

/// pcn-MCMC chains on the problem posterior.
pub fn run_mcmc(cfg: &ExperimentConfig, setup: &ProblemSetup, seed: u64) -> Result<McmcOutput> {
    let model = setup.model();
    let obs = &setup.observations;
    pcn_mcmc_reference(|v| member_misfit(model, obs, v), &setup.prior, setup.param_dim(), &chain_config(cfg), seed)
}

/// Reference fields from the chains seeded by `mcmc_seed`.
pub fn darcy_reference(cfg: &ExperimentConfig, setup: &ProblemSetup) -> Result<(McmcOutput, FieldSummary)> {
    let darcy = setup.darcy.as_ref().ok_or_else(|| Error::Unsupported("reference fields need the Darcy problem".into()))?;
    let out = run_mcmc(cfg, setup, cfg.mcmc_seed)?;
    let fields = FieldSummary::from_ensemble(darcy, &out.samples)?;
    Ok((out, fields))
}

fn blank(cfg: &ExperimentConfig, seed: u64, ensemble: Ensemble) -> RunRecord {
    RunRecord {
        config_hash: cfg.hash(),
        method: cfg.method,
        seed,
        ensemble_size: cfg.ensemble_size,
        iterations: 0,
        model_evaluations: 0,
        expected_evaluations: 0,
        diagnostics_csv: String::new(),
        timing_csv: String::new(),
        acceptance_rate: None,
        warning: None,
        ensemble,
        fields: None,
        rmse_log_k: None,
        rmse_pressure: None,
    }
}

/// Runs the configured method for one seed. RMSEs are filled in when the
/// problem has fields and `reference` is given.
pub fn run_seed(cfg: &ExperimentConfig, setup: &ProblemSetup, seed: u64, reference: Option<&FieldSummary>) -> Result<RunRecord> {
    let model = setup.model();
    let obs = &setup.observations;
    let size = cfg.ensemble_size;
    let tetpf_cfg = || -> Result<TetpfConfig> {
        let mutation = MutationConfig::new(cfg.beta, cfg.tau_max, setup.prior.clone())?;
        let mut c = TetpfConfig::new(cfg.m_thresh(), mutation, seed);
        c.transport = cfg.transport_solver();
        Ok(c)
    };
    let renkf_cfg = RenkfConfig { omega: cfg.omega, mu0: cfg.mu0, max_iterations: cfg.enkf_max_iterations, ..RenkfConfig::new(seed) };
    let darcy = || setup.darcy.as_ref().ok_or_else(|| Error::Unsupported(format!("{} needs a grid", cfg.method.name())));

    let mut record = match cfg.method {
        Method::Tetpf | Method::Tletpf => {
            let initial = setup.initial_ensemble(size, seed)?;
            let out = if cfg.method == Method::Tetpf {
                tetpf_assimilate(&initial, model, obs, &tetpf_cfg()?)?
            } else {
                let d = darcy()?;
                let taper = d.taper(cfg.r_loc)?;
                tletpf_assimilate(&initial, d.basis(), model, obs, &taper, &tetpf_cfg()?)?
            };
            let d = &out.diagnostics;
            let stalled = d.stalled_iterations();
            RunRecord {
                iterations: d.iterations,
                model_evaluations: d.model_evaluations,
                diagnostics_csv: d.to_csv(),
                timing_csv: d.timing_csv(),
                acceptance_rate: d.final_acceptance_rate(),
                warning: (stalled > 0).then(|| format!("{stalled} stalled tempering iterations")),
                ..blank(cfg, seed, out.ensemble)
            }
        }
        Method::Renkf | Method::Rlenkf => {
            let initial = setup.initial_ensemble(size, seed)?;
            let out = if cfg.method == Method::Renkf {
                renkf_assimilate(&initial, model, obs, &setup.noise, &renkf_cfg, None)?
            } else {
                let d = darcy()?;
                let taper = d.taper(cfg.r_loc)?;
                let loc = Localization { taper: &taper, field_map: d.basis() };
                renkf_assimilate(&initial, model, obs, &setup.noise, &renkf_cfg, Some(loc))?
            };
            let d = &out.diagnostics;
            RunRecord {
                iterations: d.iterations,
                model_evaluations: d.model_evaluations,
                diagnostics_csv: d.to_csv(),
                timing_csv: d.timing_csv(),
                ..blank(cfg, seed, out.ensemble)
            }
        }
        Method::Mcmc => {
            let out = run_mcmc(cfg, setup, seed)?;
            let mut csv = String::from("block,acceptance_rate\n");
            for (b, a) in out.block_acceptance.iter().enumerate() {
                let _ = writeln!(csv, "{},{:.17e}", b + 1, a);
            }
            RunRecord {
                ensemble_size: out.samples.size(),
                iterations: out.block_acceptance.len(),
                model_evaluations: out.evaluations,
                diagnostics_csv: csv,
                timing_csv: String::from("block,wall_time_s\n"),
                acceptance_rate: Some(out.acceptance_rate),
                warning: out.warning,
                ..blank(cfg, seed, out.samples)
            }
        }
    };
    record.expected_evaluations = expected_evaluations(cfg.method, record.iterations, size, cfg);

    if let Some(d) = &setup.darcy {
        let fields = FieldSummary::from_ensemble(d, &record.ensemble)?;
        if let Some(r) = reference {
            if cfg.method != Method::Mcmc {
                record.rmse_log_k = Some(rmse(&fields.mean_log_k, &r.mean_log_k)?);
                record.rmse_pressure = Some(rmse(&fields.mean_pressure, &r.mean_pressure)?);
            }
        }
        record.fields = Some(fields);
    }
    Ok(record)
}

/// Runs every seed of the config in parallel; results come back in seed order.
pub fn run_experiment(cfg: &ExperimentConfig, setup: &ProblemSetup, reference: Option<&FieldSummary>) -> Vec<(u64, Result<RunRecord>)> {
    cfg.seeds
        .par_iter()
        .map(|&s| (s, run_seed(cfg, setup, s, reference)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(method: &str, extra: &str) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            "problem = \"toy\"\nmethod = \"{method}\"\nensemble_size = 40\nseeds = [3, 4]\ntau_max = 3\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn toy_runs_count_evaluations() {
        let cfg = toy("tetpf", "");
        let setup = ProblemSetup::new(&cfg, None).unwrap();
        for (_, r) in run_experiment(&cfg, &setup, None) {
            let r = r.unwrap();
            assert_eq!(r.model_evaluations, r.expected_evaluations);
            assert!(r.iterations >= 1);
            assert!(r.fields.is_none() && r.rmse_log_k.is_none());
        }
    }

    #[test]
    fn enkf_abort_keeps_partial_diagnostics() {
        let cfg = toy("renkf", "enkf_max_iterations = 5");
        let setup = ProblemSetup::new(&cfg, None).unwrap();
        match run_seed(&cfg, &setup, 3, None) {
            Err(Error::Aborted { iterations, partial_csv, .. }) => {
                assert_eq!(iterations, 5);
                assert!(partial_csv.starts_with("iteration,mu"));
            }
            Ok(r) => assert_eq!(r.model_evaluations, r.expected_evaluations),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let cfg = toy("tetpf", "");
        let setup = ProblemSetup::new(&cfg, None).unwrap();
        let a = run_seed(&cfg, &setup, 9, None).unwrap();
        let b = run_seed(&cfg, &setup, 9, None).unwrap();
        assert_eq!(a.diagnostics_csv, b.diagnostics_csv);
        assert_eq!(a.ensemble.data(), b.ensemble.data());
    }

    #[test]
    fn toy_chains_count_evaluations() {
        let cfg = toy("mcmc", "mcmc_chains = 2\nmcmc_length = 300\nmcmc_burn_in = 100\nmcmc_thinning = 10");
        let setup = ProblemSetup::new(&cfg, None).unwrap();
        let r = run_seed(&cfg, &setup, 1, None).unwrap();
        assert_eq!(r.model_evaluations, r.expected_evaluations);
        assert_eq!(r.ensemble.size(), 2 * 20);
        assert_eq!(r.iterations, 30);
    }
}

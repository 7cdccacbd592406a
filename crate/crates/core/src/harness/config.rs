use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::KernelMode;
use crate::transport::{SinkhornConfig, TransportSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Toy,
    Darcy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tetpf,
    Tletpf,
    Renkf,
    Rlenkf,
    Mcmc,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Tetpf => "TETPF",
            Method::Tletpf => "TLETPF",
            Method::Renkf => "REnKF",
            Method::Rlenkf => "RLEnKF",
            Method::Mcmc => "MCMC",
        }
    }

    pub fn is_localized(&self) -> bool {
        matches!(self, Method::Tletpf | Method::Rlenkf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Exact,
    Sinkhorn,
}

/// One experiment: a problem, a method and a list of seeds.
///
/// Stored as a flat `key = value` TOML file; every key except `problem`,
/// `method`, `ensemble_size` and `seeds` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub problem: ProblemKind,
    pub method: Method,
    pub ensemble_size: usize,
    pub seeds: Vec<u64>,

    /// `M_thresh = ess_fraction * M`.
    #[serde(default = "half")]
    pub ess_fraction: f64,
    #[serde(default = "twenty")]
    pub tau_max: usize,
    #[serde(default = "beta_default")]
    pub beta: f64,
    #[serde(default = "exact")]
    pub transport: TransportKind,
    #[serde(default = "sinkhorn_eps")]
    pub sinkhorn_epsilon: f64,

    #[serde(default = "omega_default")]
    pub omega: f64,
    #[serde(default = "one")]
    pub mu0: f64,
    /// Sweep cap of R(L)EnKF before the run aborts.
    #[serde(default = "enkf_cap")]
    pub enkf_max_iterations: usize,

    #[serde(default = "one")]
    pub r_loc: f64,

    #[serde(default = "toy_y")]
    pub toy_observation: f64,
    #[serde(default = "toy_r")]
    pub toy_noise_variance: f64,

    #[serde(default = "coarse")]
    pub coarse_grid: usize,
    #[serde(default = "fine")]
    pub fine_grid: usize,
    #[serde(default = "m_kl_default")]
    pub m_kl: usize,
    /// Modes used for the truth on the fine grid; all of them when absent.
    #[serde(default)]
    pub truth_m_kl: Option<usize>,
    #[serde(default = "delta_default")]
    pub correlation_length: f64,
    #[serde(default = "sigma_default")]
    pub kernel_sigma: f64,
    #[serde(default = "normalized")]
    pub kernel_mode: KernelMode,
    #[serde(default = "seven")]
    pub wells_per_side: usize,
    #[serde(default = "noise_default")]
    pub noise_level: f64,
    #[serde(default)]
    pub truth_seed: u64,
    #[serde(default)]
    pub q_prior_low: f64,
    #[serde(default = "q_high")]
    pub q_prior_high: f64,

    #[serde(default = "chains")]
    pub mcmc_chains: usize,
    #[serde(default = "chain_length")]
    pub mcmc_length: usize,
    #[serde(default = "burn_in")]
    pub mcmc_burn_in: usize,
    #[serde(default = "thinning")]
    pub mcmc_thinning: usize,
    /// pcn step of the reference chains.
    #[serde(default)]
    pub mcmc_beta: Option<f64>,
    #[serde(default)]
    pub mcmc_seed: u64,

    #[serde(default = "resolution")]
    pub oracle_resolution: usize,
    #[serde(default = "bins")]
    pub histogram_bins: usize,

    /// Precomputed reference fields (`reference_fields.csv`) for RMSE.
    #[serde(default)]
    pub reference: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn half() -> f64 {
    0.5
}
fn twenty() -> usize {
    20
}
fn beta_default() -> f64 {
    0.02
}
fn exact() -> TransportKind {
    TransportKind::Exact
}
fn sinkhorn_eps() -> f64 {
    1e-2
}
fn omega_default() -> f64 {
    0.7
}
fn one() -> f64 {
    1.0
}
fn enkf_cap() -> usize {
    1000
}
fn toy_y() -> f64 {
    1.8
}
fn toy_r() -> f64 {
    1e-3
}
fn coarse() -> usize {
    35
}
fn fine() -> usize {
    70
}
fn m_kl_default() -> usize {
    100
}
fn delta_default() -> f64 {
    0.5
}
fn sigma_default() -> f64 {
    0.01
}
fn normalized() -> KernelMode {
    KernelMode::DiscreteNormalized
}
fn seven() -> usize {
    7
}
fn noise_default() -> f64 {
    0.01
}
fn q_high() -> f64 {
    0.5
}
fn chains() -> usize {
    4
}
fn chain_length() -> usize {
    20_000
}
fn burn_in() -> usize {
    5_000
}
fn thinning() -> usize {
    100
}
fn resolution() -> usize {
    2000
}
fn bins() -> usize {
    50
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        if cfg.name.is_empty() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        if let Some(r) = &cfg.reference {
            if r.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.reference = Some(dir.join(r));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.ensemble_size < 2 {
            return bad(format!("ensemble_size must be at least 2, got {}", self.ensemble_size));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let thresh = self.m_thresh();
        if matches!(self.method, Method::Tetpf | Method::Tletpf) && !(thresh > 1.0 && thresh < self.ensemble_size as f64) {
            return bad(format!("ESS threshold {thresh} outside (1, {})", self.ensemble_size));
        }
        if !(0.0..1.0).contains(&self.beta) || self.tau_max == 0 {
            return bad("need 0 <= beta < 1 and tau_max >= 1".into());
        }
        if !(self.omega > 0.0 && self.omega < 1.0) || !(self.mu0 > 0.0) {
            return bad("need 0 < omega < 1 and mu0 > 0".into());
        }
        if self.enkf_max_iterations == 0 {
            return bad("enkf_max_iterations must be positive".into());
        }
        if !(self.r_loc > 0.0) {
            return bad("r_loc must be positive".into());
        }
        if self.problem == ProblemKind::Toy && self.method.is_localized() {
            return bad("the toy problem has no grid to localize on".into());
        }
        if self.problem == ProblemKind::Darcy {
            if self.coarse_grid < 2 || self.fine_grid < 2 || self.wells_per_side == 0 {
                return bad("grids need at least two cells per side and one well".into());
            }
            if self.m_kl == 0 || self.m_kl > self.coarse_grid * self.coarse_grid {
                return bad(format!("m_kl = {} outside 1..={}", self.m_kl, self.coarse_grid * self.coarse_grid));
            }
            if !(self.q_prior_low < self.q_prior_high) {
                return bad("q prior needs low < high".into());
            }
        }
        if self.mcmc_thinning == 0 || self.mcmc_length <= self.mcmc_burn_in || self.mcmc_chains == 0 {
            return bad("chain length must exceed burn-in, thinning and chains must be positive".into());
        }
        if self.histogram_bins == 0 || self.oracle_resolution < 100 {
            return bad("need at least one histogram bin and 100 oracle points per axis".into());
        }
        Ok(())
    }

    pub fn m_thresh(&self) -> f64 {
        self.ess_fraction * self.ensemble_size as f64
    }

    pub fn transport_solver(&self) -> TransportSolver {
        match self.transport {
            TransportKind::Exact => TransportSolver::Exact,
            TransportKind::Sinkhorn => TransportSolver::Entropic(SinkhornConfig { epsilon: self.sinkhorn_epsilon, ..Default::default() }),
        }
    }

    pub fn chain_beta(&self) -> f64 {
        self.mcmc_beta.unwrap_or(0.045)
    }

    /// SHA-256 of the canonical JSON form, ignoring the output location and
    /// the display name.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.name = String::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Problem-level settings shared by all methods, used to key cached
    /// truths and references.
    pub fn problem_hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.name = String::new();
        c.method = Method::Mcmc;
        c.ensemble_size = 2;
        c.seeds = vec![0];
        c.ess_fraction = 0.5;
        c.tau_max = 1;
        c.beta = 0.0;
        c.transport = TransportKind::Exact;
        c.sinkhorn_epsilon = 1.0;
        c.omega = 0.5;
        c.enkf_max_iterations = 1;
        c.mu0 = 1.0;
        c.r_loc = 1.0;
        c.mcmc_beta = Some(self.chain_beta());
        c.reference = None;
        c.histogram_bins = 1;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
problem = "toy"
method = "tetpf"
ensemble_size = 1000
seeds = [1, 2, 3]
"#;

    #[test]
    fn defaults_and_thresholds() {
        let c = ExperimentConfig::parse(TOY).unwrap();
        assert_eq!(c.m_thresh(), 500.0);
        assert_eq!(c.tau_max, 20);
        assert_eq!(c.beta, 0.02);
        assert_eq!(c.toy_observation, 1.8);
        assert_eq!(c.omega, 0.7);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::parse(&format!("{TOY}\nfoo = 1\n")).is_err());
        assert!(ExperimentConfig::parse("problem = \"toy\"").is_err());
        let loc = TOY.replace("\"tetpf\"", "\"tletpf\"");
        assert!(ExperimentConfig::parse(&loc).is_err());
    }

    #[test]
    fn hash_ignores_output_and_round_trips() {
        let a = ExperimentConfig::parse(TOY).unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.beta = 0.03;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.problem_hash(), b.problem_hash());
        let again = ExperimentConfig::parse(&a.to_toml()).unwrap();
        assert_eq!(again, a);
    }
}

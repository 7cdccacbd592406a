//! Experiment driver: configs, problem setup, method dispatch, reference
//! posteriors and the CSV tables for the method comparison.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod output;
pub mod problems;
pub mod reference;

pub use config::{ExperimentConfig, Method, ProblemKind, TransportKind};
pub use experiment::{darcy_reference, run_experiment, run_mcmc, run_seed, FieldSummary, RunRecord};
pub use metrics::{kde_mode, percentile, prominent_maxima, skewness, tv_distance, Histogram};
pub use output::{aggregate, aggregate_dir, report, write_run, RmseRow, SummaryRow};
pub use problems::{DarcySetup, DarcyTruth, ProblemSetup};
pub use reference::{bayes_grid_oracle, pcn_mcmc_reference, BayesGrid, ChainConfig, McmcOutput, ToyPosteriorSpec};

use std::sync::Arc;

use super::config::{ExperimentConfig, ProblemKind};
use crate::ensemble::{Ensemble, Marginal, ObservationSet, PriorSpec};
use crate::error::Result;
use crate::grid::GridSpec;
use crate::localization::TaperMatrix;
use crate::models::{
    build_kl_basis, synthesize_observations, DarcyModel, DarcyProblem, ForwardModel, KlBasis, ObservationFunctionalSpec,
    ObservationOperator, SyntheticData, ToyModel,
};
use crate::rng::{stream, Purpose};

/// Synthetic data on the fine grid. Shared by every method and seed of a
/// problem, since it depends only on problem-level settings.
#[derive(Debug, Clone)]
pub struct DarcyTruth {
    pub fine_grid: GridSpec,
    pub spec: ObservationFunctionalSpec,
    pub data: SyntheticData,
}

impl DarcyTruth {
    pub fn generate(cfg: &ExperimentConfig) -> Result<Self> {
        let coarse = GridSpec::new(cfg.coarse_grid)?;
        let fine_grid = GridSpec::new(cfg.fine_grid)?;
        let modes = cfg.truth_m_kl.unwrap_or(fine_grid.num_cells()).min(fine_grid.num_cells());
        let basis = build_kl_basis(&fine_grid, cfg.correlation_length, modes)?;
        // wells sit on the inversion grid's cell centers
        let spec = ObservationFunctionalSpec::new(cfg.kernel_sigma, coarse.well_lattice(cfg.wells_per_side), cfg.kernel_mode)?;
        let data = synthesize_observations(&DarcyProblem::benchmark(fine_grid), &basis, &spec, cfg.noise_level, cfg.truth_seed)?;
        Ok(Self { fine_grid, spec, data })
    }
}

/// Everything a method needs: forward model, data, realized noise and prior.
#[derive(Clone)]
pub struct ProblemSetup {
    pub kind: ProblemKind,
    pub prior: PriorSpec,
    pub observations: ObservationSet,
    /// Realized observation noise, used by the discrepancy principle.
    pub noise: Vec<f64>,
    pub darcy: Option<DarcySetup>,
}

#[derive(Clone)]
pub struct DarcySetup {
    pub model: DarcyModel,
    pub truth: Arc<DarcyTruth>,
}

impl DarcySetup {
    pub fn basis(&self) -> &KlBasis {
        &self.model.basis
    }

    pub fn grid(&self) -> GridSpec {
        self.model.problem.grid
    }

    pub fn taper(&self, r_loc: f64) -> Result<TaperMatrix> {
        TaperMatrix::build(&self.grid(), &self.truth.spec.locations, r_loc)
    }
}

impl ProblemSetup {
    /// Builds the problem, generating the Darcy truth when none is supplied.
    pub fn new(cfg: &ExperimentConfig, truth: Option<Arc<DarcyTruth>>) -> Result<Self> {
        match cfg.problem {
            ProblemKind::Toy => {
                let r = cfg.toy_noise_variance;
                let observations = ObservationSet::with_isotropic_noise(vec![cfg.toy_observation; 2], None, r)?;
                let prior = PriorSpec::blocks(
                    2,
                    Marginal::Gaussian { mean: 2.4, std: 1.0 },
                    2,
                    Marginal::Gaussian { mean: 1.0, std: 0.1 },
                )?;
                // the data are given, not simulated; one noise standard deviation per component
                Ok(Self { kind: cfg.problem, prior, observations, noise: vec![r.sqrt(); 2], darcy: None })
            }
            ProblemKind::Darcy => {
                let truth = match truth {
                    Some(t) => t,
                    None => Arc::new(DarcyTruth::generate(cfg)?),
                };
                let grid = GridSpec::new(cfg.coarse_grid)?;
                let basis = build_kl_basis(&grid, cfg.correlation_length, cfg.m_kl)?;
                let operator = ObservationOperator::new(grid, truth.spec.clone())?;
                let model = DarcyModel::new(DarcyProblem::benchmark(grid), basis, operator)?;
                let prior = PriorSpec::blocks(
                    cfg.m_kl,
                    Marginal::Gaussian { mean: 0.0, std: 1.0 },
                    1,
                    Marginal::Uniform { a: cfg.q_prior_low, b: cfg.q_prior_high },
                )?;
                Ok(Self {
                    kind: cfg.problem,
                    prior,
                    observations: truth.data.observations.clone(),
                    noise: truth.data.noise.clone(),
                    darcy: Some(DarcySetup { model, truth }),
                })
            }
        }
    }

    pub fn model(&self) -> &dyn ForwardModel {
        match &self.darcy {
            Some(d) => &d.model,
            None => &ToyModel,
        }
    }

    pub fn param_dim(&self) -> usize {
        self.model().param_dim()
    }

    /// Initial ensemble for one seed, one prior stream per member.
    pub fn initial_ensemble(&self, size: usize, seed: u64) -> Result<Ensemble> {
        self.prior
            .sample_ensemble(self.param_dim(), size, |i| stream(seed, Purpose::Prior, 0, i as u64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_setup_matches_problem_statement() {
        let cfg = ExperimentConfig::parse("problem = \"toy\"\nmethod = \"renkf\"\nensemble_size = 10\nseeds = [1]").unwrap();
        let s = ProblemSetup::new(&cfg, None).unwrap();
        assert_eq!(s.observations.values, vec![1.8, 1.8]);
        assert_eq!(s.prior.dim(), 4);
        let e = s.initial_ensemble(10, 1).unwrap();
        assert_eq!((e.param_dim(), e.error_dim(), e.size()), (2, 2, 10));
        assert_eq!(e.data(), s.initial_ensemble(10, 1).unwrap().data());
        assert_ne!(e.data(), s.initial_ensemble(10, 2).unwrap().data());
    }

    #[test]
    fn small_darcy_setup() {
        let cfg = ExperimentConfig::parse(
            "problem = \"darcy\"\nmethod = \"rlenkf\"\nensemble_size = 10\nseeds = [1]\ncoarse_grid = 8\nfine_grid = 16\nm_kl = 10\nwells_per_side = 2",
        )
        .unwrap();
        let s = ProblemSetup::new(&cfg, None).unwrap();
        assert_eq!(s.observations.len(), 4);
        assert_eq!(s.noise.len(), 4);
        let e = s.initial_ensemble(10, 3).unwrap();
        assert!(e.error_block().iter().all(|q| (0.0..0.5).contains(q)));
        let d = s.darcy.as_ref().unwrap();
        assert_eq!(d.taper(3.0).unwrap().kappa(), 4);
    }
}

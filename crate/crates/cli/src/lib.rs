//! Experiment runner for the `rbcert-core` reduced-basis bounds.
//!
//! Builds a benchmark from an [`ExperimentConfig`], sweeps reduced-basis
//! sizes or runs a certified Sobol analysis, and writes CSV tables whose
//! header comments carry the full config and seeds. Trained goal-oriented
//! bounds can be saved as [`Artifact`]s and evaluated later at single
//! parameters.

pub mod artifact;
pub mod config;
pub mod run;

pub use artifact::Artifact;
pub use config::{Benchmark, ExperimentConfig, Seeds, SobolConfig};
pub use run::{run_convergence, run_sobol, ConvergenceRow, ConvergenceTable, PointBound, SobolTable};

use rbcert_core::bounds::{train_goal_oriented, TrainingConfig};
use rbcert_core::reduction::collect_snapshots;
use rbcert_core::{pod_basis, ReducedModel};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("numeric failure{}: {source}", basis_size.map(|n| format!(" at basis size {n}")).unwrap_or_default())]
    Numeric { basis_size: Option<usize>, source: rbcert_core::Error },
}

impl CliError {
    /// 2 for bad input (config, files), 3 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric { .. } => 3,
        }
    }
}

/// Trains the goal-oriented bound at the largest configured basis size.
pub fn train(cfg: &ExperimentConfig, corrected: bool) -> Result<Artifact, CliError> {
    cfg.validate()?;
    let model = cfg.benchmark.build()?;
    let n = *cfg.basis_sizes.iter().max().expect("validated non-empty");
    let err = |source| CliError::Numeric { basis_size: Some(n), source };
    let params = model.domain().sample_seeded(cfg.pod_snapshots, cfg.seeds.snapshot);
    let (primal, adjoint) = collect_snapshots(&model, &params).map_err(err)?;
    let dual = if corrected { Some(run::dual_basis(&adjoint, n).map_err(err)?) } else { None };
    let rm = ReducedModel::project(&model, pod_basis(&primal, n).map_err(err)?, dual).map_err(err)?;
    let tc = TrainingConfig {
        sample_size: cfg.bound_snapshots,
        truncation: cfg.truncation,
        corrected,
        seed: cfg.seeds.train,
        t2_halved: cfg.t2_halved,
    };
    let data = train_goal_oriented(&model, &rm, &cfg.partition()?, &tc).map_err(err)?;
    Ok(Artifact {
        benchmark: cfg.benchmark.name().to_string(),
        full_dim: model.dim(),
        config: cfg.to_pairs(),
        basis: rm.basis().matrix().clone(),
        dual: rm.dual().map(|d| d.basis().matrix().clone()),
        data,
    })
}

/// Bounds the output at `mu` with a stored artifact; the model is rebuilt
/// from the config recorded in it.
pub fn eval(art: &Artifact, mu: &[f64], risk: f64) -> Result<PointBound, CliError> {
    let cfg = ExperimentConfig::from_pairs(art.config.clone())?;
    let model = cfg.benchmark.build()?;
    if model.dim() != art.full_dim || cfg.benchmark.name() != art.benchmark {
        return Err(CliError::Config("artifact does not match its recorded benchmark".into()));
    }
    if !(risk > 0.0 && risk < 1.0) {
        return Err(CliError::Config(format!("risk {risk} outside (0, 1)")));
    }
    if mu.len() != model.domain().dim() || !model.domain().contains(mu) {
        return Err(CliError::Config(format!("mu = {mu:?} outside the parameter domain")));
    }
    let (basis, dual) = art.bases()?;
    let rm = ReducedModel::project(&model, basis, dual)
        .map_err(|source| CliError::Numeric { basis_size: Some(art.basis.ncols()), source })?;
    run::point_bound(&rm, &art.data, mu, risk)
}

//! Batch experiments: configuration, replication with seed splitting, and
//! report emission.

mod report;
mod runners;
pub mod svg;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{
    emit_report, ConvergenceRow, CoverageRow, ExperimentOutput, IlanRow, PerturbationRow, Report,
};
pub use runners::{
    ks_to_normal, parametric_prior_density, run_boundary_bvm, run_coverage, run_ilan_probe, run_mixture_bvm,
    run_parametric_demo, run_perturbation_probe, run_plr_bvm,
};

use crate::models::boundary::BoundaryConfig;
use crate::models::mixture::MixtureConfig;
use crate::models::plr::{NuisancePrior, PlrConfig, PlrMode};
use crate::models::ModelError;
use crate::rng::SplitRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ParametricDemo,
    PlrBvm,
    MixtureBvm,
    BoundaryBvm,
    Coverage,
    IlanProbe,
    PerturbationProbe,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::ParametricDemo,
        ExperimentKind::PlrBvm,
        ExperimentKind::MixtureBvm,
        ExperimentKind::BoundaryBvm,
        ExperimentKind::Coverage,
        ExperimentKind::IlanProbe,
        ExperimentKind::PerturbationProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ParametricDemo => "parametric_demo",
            ExperimentKind::PlrBvm => "plr_bvm",
            ExperimentKind::MixtureBvm => "mixture_bvm",
            ExperimentKind::BoundaryBvm => "boundary_bvm",
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::IlanProbe => "ilan_probe",
            ExperimentKind::PerturbationProbe => "perturbation_probe",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Normal-means model on `Θ = [−1, 2]` with unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParametricParams {
    pub theta0: f64,
    pub grid_points: usize,
}

impl Default for ParametricParams {
    fn default() -> Self {
        Self { theta0: 0.5, grid_points: 6001 }
    }
}

/// Model settings for every experiment kind; each run reads the parts it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub parametric: ParametricParams,
    pub plr: PlrConfig,
    pub plr_mode: PlrMode,
    /// Points of the `h` grid for PLR posteriors (±12 likelihood sd).
    pub h_grid_points: usize,
    pub mixture: MixtureConfig,
    pub mixture_iters: usize,
    pub boundary: BoundaryConfig,
    pub boundary_iters: usize,
    pub coverage_levels: Vec<f64>,
    pub ilan_h: Vec<f64>,
    pub ilan_draws: usize,
    pub perturbation_h: Vec<f64>,
    pub perturbation_radius: f64,
    pub perturbation_draws: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            parametric: ParametricParams::default(),
            plr: PlrConfig::default(),
            plr_mode: PlrMode::Exact,
            h_grid_points: 2001,
            mixture: MixtureConfig::default(),
            mixture_iters: 2000,
            boundary: BoundaryConfig::default(),
            boundary_iters: 2000,
            coverage_levels: vec![0.95, 0.5],
            ilan_h: vec![-1.0, -0.5, 0.5, 1.0],
            ilan_draws: 2000,
            perturbation_h: vec![-1.0, 1.0],
            perturbation_radius: 0.2,
            perturbation_draws: 400,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub model_params: ModelParams,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("n = {n}, replication {replication}: {source}")]
    Run {
        n: usize,
        replication: usize,
        #[source]
        source: ModelError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit code: 2 for configuration errors, 3 for sampler
    /// diagnostics failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Run { source: ModelError::Diagnostics(_), .. } => 3,
            ExperimentError::Run { source: ModelError::InvalidConfig(_), .. } => 2,
            _ => 1,
        }
    }
}

impl From<ModelError> for ExperimentError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig(msg) => ExperimentError::Config(msg),
            other => ExperimentError::Config(other.to_string()),
        }
    }
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

impl ExperimentConfig {
    /// A config with default model parameters.
    pub fn new(experiment: ExperimentKind, n_values: Vec<usize>, replications: usize, seed: u64) -> Self {
        Self {
            experiment,
            n_values,
            replications,
            seed,
            model_params: ModelParams::default(),
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, ExperimentError> {
        let config: Self = serde_json::from_str(text).map_err(|e| config_err(format!("invalid config JSON: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_values.is_empty() {
            return Err(config_err("n_values must be nonempty"));
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("n_values must be strictly ascending"));
        }
        if self.replications == 0 {
            return Err(config_err("replications must be at least 1"));
        }
        let min_n = if self.experiment == ExperimentKind::ParametricDemo { 0 } else { 1 };
        if self.n_values[0] < min_n {
            return Err(config_err(format!("{} needs n ≥ {min_n}", self.experiment.name())));
        }
        let p = &self.model_params;
        match self.experiment {
            ExperimentKind::ParametricDemo => {
                if !(-1.0..=2.0).contains(&p.parametric.theta0) {
                    return Err(config_err("parametric.theta0 must lie in [-1, 2]"));
                }
                if p.parametric.grid_points < 101 {
                    return Err(config_err("parametric.grid_points must be at least 101"));
                }
            }
            ExperimentKind::PlrBvm | ExperimentKind::Coverage => {
                p.plr.validate()?;
                self.check_plr_mode()?;
                if p.h_grid_points < 101 {
                    return Err(config_err("h_grid_points must be at least 101"));
                }
                if self.experiment == ExperimentKind::Coverage
                    && (p.coverage_levels.is_empty() || p.coverage_levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)))
                {
                    return Err(config_err("coverage_levels must be a nonempty list in (0, 1)"));
                }
            }
            ExperimentKind::MixtureBvm => {
                p.mixture.validate()?;
                if p.mixture_iters < 10 {
                    return Err(config_err("mixture_iters must be at least 10"));
                }
            }
            ExperimentKind::BoundaryBvm => {
                p.boundary.validate()?;
                if p.boundary_iters < 10 {
                    return Err(config_err("boundary_iters must be at least 10"));
                }
            }
            ExperimentKind::IlanProbe => {
                p.plr.validate()?;
                if p.plr.nuisance_prior != NuisancePrior::Ibm {
                    return Err(config_err("ilan_probe needs the Gaussian (ibm) nuisance prior"));
                }
                if p.ilan_h.is_empty() || p.ilan_draws == 0 {
                    return Err(config_err("ilan_probe needs nonempty ilan_h and positive ilan_draws"));
                }
            }
            ExperimentKind::PerturbationProbe => {
                p.plr.validate()?;
                if p.perturbation_h.is_empty() || p.perturbation_draws == 0 || !(p.perturbation_radius > 0.0) {
                    return Err(config_err(
                        "perturbation_probe needs nonempty perturbation_h, positive draws and a positive radius",
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_plr_mode(&self) -> Result<(), ExperimentError> {
        let p = &self.model_params;
        match p.plr_mode {
            PlrMode::Exact if p.plr.nuisance_prior == NuisancePrior::Conditioned => {
                Err(config_err("the conditioned nuisance prior needs plr_mode mcmc"))
            }
            PlrMode::Mcmc { steps } if steps < 10 => Err(config_err("plr_mode.steps must be at least 10")),
            _ => Ok(()),
        }
    }

    /// Generator for replication `replication` at sample size `n`; depends
    /// only on `(seed, n, replication)`.
    pub fn replication_rng(&self, n: usize, replication: usize) -> SplitRng {
        SplitRng::new(self.seed).split_path(&[n as u64, replication as u64])
    }
}

/// Runs `f` for every `(n, replication)` cell, in parallel on the current
/// rayon pool, and returns results in `(n, replication)` order.
pub(crate) fn replicate<T, F>(config: &ExperimentConfig, f: F) -> Result<Vec<Vec<T>>, ExperimentError>
where
    T: Send,
    F: Fn(usize, usize, SplitRng) -> Result<T, ModelError> + Sync,
{
    let reps = config.replications;
    let cells: Vec<(usize, usize)> =
        config.n_values.iter().flat_map(|&n| (0..reps).map(move |r| (n, r))).collect();
    let results: Vec<Result<T, ExperimentError>> = cells
        .par_iter()
        .map(|&(n, r)| f(n, r, config.replication_rng(n, r)).map_err(|source| ExperimentError::Run { n, replication: r, source }))
        .collect();
    let mut out: Vec<Vec<T>> = Vec::with_capacity(config.n_values.len());
    let mut it = results.into_iter();
    for _ in &config.n_values {
        let mut row = Vec::with_capacity(reps);
        for _ in 0..reps {
            row.push(it.next().expect("one result per cell")?);
        }
        out.push(row);
    }
    Ok(out)
}

/// Runs the configured experiment on a pool of `jobs` threads (all cores
/// when `None`).
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(config_err("--jobs must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| config_err(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match config.experiment {
        ExperimentKind::ParametricDemo => run_parametric_demo(config),
        ExperimentKind::PlrBvm => run_plr_bvm(config),
        ExperimentKind::MixtureBvm => run_mixture_bvm(config),
        ExperimentKind::BoundaryBvm => run_boundary_bvm(config),
        ExperimentKind::Coverage => run_coverage(config),
        ExperimentKind::IlanProbe => run_ilan_probe(config),
        ExperimentKind::PerturbationProbe => run_perturbation_probe(config),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_roundtrip_and_defaults() {
        let text = r#"{"experiment":"plr_bvm","n_values":[50,200],"replications":2,"seed":7}"#;
        let c = ExperimentConfig::from_json_str(text).unwrap();
        assert_eq!(c.experiment, ExperimentKind::PlrBvm);
        assert_eq!(c.model_params, ModelParams::default());
        assert_eq!(c.output_dir, PathBuf::from("out"));
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn config_validation() {
        let bad = [
            r#"{"experiment":"plr_bvm","n_values":[],"replications":2,"seed":7}"#,
            r#"{"experiment":"plr_bvm","n_values":[200,50],"replications":2,"seed":7}"#,
            r#"{"experiment":"plr_bvm","n_values":[50],"replications":0,"seed":7}"#,
            r#"{"experiment":"plr_bvm","n_values":[0,50],"replications":1,"seed":7}"#,
            r#"{"experiment":"nope","n_values":[50],"replications":1,"seed":7}"#,
            r#"{"experiment":"plr_bvm","n_values":[50],"replications":1,"seed":7,"extra":1}"#,
            r#"{"experiment":"coverage","n_values":[50],"replications":1,"seed":7,"model_params":{"coverage_levels":[1.5]}}"#,
            r#"{"experiment":"mixture_bvm","n_values":[50],"replications":1,"seed":7,"model_params":{"mixture":{"sigma0":5.0}}}"#,
        ];
        for b in bad {
            let e = ExperimentConfig::from_json_str(b).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{b}");
        }
        let ok = r#"{"experiment":"parametric_demo","n_values":[0,4],"replications":1,"seed":7}"#;
        assert!(ExperimentConfig::from_json_str(ok).is_ok());
    }

    #[test]
    fn replication_seeds_are_independent_of_layout() {
        let a = ExperimentConfig::new(ExperimentKind::PlrBvm, vec![50, 200], 3, 9);
        let b = ExperimentConfig::new(ExperimentKind::PlrBvm, vec![200], 1, 9);
        assert_eq!(a.replication_rng(200, 0).seed(), b.replication_rng(200, 0).seed());
        assert_ne!(a.replication_rng(200, 0).seed(), a.replication_rng(200, 1).seed());
        assert_ne!(a.replication_rng(50, 0).seed(), a.replication_rng(200, 0).seed());
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::from_name(k.name()), Some(k));
            assert_eq!(serde_json::to_value(k).unwrap(), k.name());
        }
    }
}

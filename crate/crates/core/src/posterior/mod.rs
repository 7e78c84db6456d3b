//! Turning log-likelihoods and log-priors into posterior densities.

mod chain;
mod ess;
mod grid;
mod metropolis;

pub use chain::{chain_to_density, draws_to_density, Chain, ChainDiagnostics};
pub use ess::{effective_sample_size, ess_of};
pub use grid::{grid_posterior, grid_posterior_from_log};
pub use metropolis::{rw_metropolis, MetropolisConfig};

use thiserror::Error;

use crate::stats::StatError;

/// Unnormalized log-density over a fixed-size state vector.
///
/// `-inf` encodes zero density. Implementations must never return `+inf` or
/// NaN and must be safe to call from several threads.
pub trait LogTarget: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, state: &[f64]) -> f64;
}

/// Adapts a closure into a [`LogTarget`].
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> LogTarget for FnTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, state: &[f64]) -> f64 {
        (self.f)(state)
    }
}

#[derive(Debug, Error)]
pub enum PosteriorError {
    #[error("posterior mass is numerically zero on the whole grid")]
    ZeroPosteriorMass,
    #[error("target returned NaN or +inf at {0:?}")]
    InvalidLogDensity(Vec<f64>),
    #[error("initial state lies outside the target support")]
    InitOutsideSupport,
    #[error("initial state has dimension {got}, target expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{steps} steps do not exceed the burn-in length {burn_in}")]
    StepsBelowBurnIn { steps: usize, burn_in: usize },
    #[error("chain of length {len} is too short (need at least {min})")]
    ChainTooShort { len: usize, min: usize },
    #[error("coordinate {coordinate} out of range for a {dim}-dimensional chain")]
    NoSuchCoordinate { coordinate: usize, dim: usize },
    #[error("effective sample size {ess:.1} is below the hard floor {floor}")]
    InsufficientEss { ess: f64, floor: f64 },
    #[error("no draws fall inside the density grid")]
    MassOutsideGrid,
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

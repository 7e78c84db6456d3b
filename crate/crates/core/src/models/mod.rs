//! The three semiparametric models: partial linear regression, normal
//! location mixtures and the support-boundary model.

pub mod boundary;
pub mod mixture;
pub mod nuisance;
pub mod plr;

pub use nuisance::NuisancePath;

use thiserror::Error;

use crate::lan::LanError;
use crate::posterior::PosteriorError;
use crate::stats::StatError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("conditioned prior rejected {attempts} consecutive draws; the bound is too small for this prior")]
    PriorRejection { attempts: usize },
    #[error("covariance factorization failed: {0}")]
    IllConditioned(String),
    #[error("envelope violated at x = {x}, σ = {sigma}: {density} not in [{lower}, {upper}]")]
    EnvelopeViolation { x: f64, sigma: f64, lower: f64, density: f64, upper: f64 },
    #[error("sampler diagnostics failed: {0}")]
    Diagnostics(String),
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Lan(#[from] LanError),
}

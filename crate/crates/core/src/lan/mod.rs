//! Local expansions of log-likelihoods around the truth.
//!
//! Everything here is phrased in terms of a local parameter `h`: for regular
//! (LAN) families `θ = θ₀ + h/√n`, for boundary (LAE) families
//! `θ = θ₀ + h/n`. The rate is declared by the model through [`LocalFrame`].

mod expansion;
mod influence;
mod integrated;
mod projection;

pub use expansion::{
    delta_tilde, gamma_n, lae_remainder, lan_remainder, mle_linearity_gap, ExpansionReport, LaeRemainder,
    LanRemainder,
};
pub use influence::{EfficientInfluence, ScalarFn, VectorFn};
pub use integrated::{
    ilan_remainder, ilan_remainder_conditional, integrated_likelihood, integrated_likelihood_ratio,
};
pub use projection::{project_efficient_score, Projection};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::StatError;

/// How the local parameter maps back to `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalRate {
    /// `h = √n (θ − θ₀)`
    SqrtN,
    /// `h = n (θ − θ₀)`
    LinearN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub theta0: f64,
    pub rate: LocalRate,
}

impl LocalFrame {
    pub fn new(theta0: f64, rate: LocalRate) -> Self {
        Self { theta0, rate }
    }

    fn scale(&self, n: usize) -> f64 {
        match self.rate {
            LocalRate::SqrtN => (n as f64).sqrt(),
            LocalRate::LinearN => n as f64,
        }
    }

    /// `θₙ(h)`.
    pub fn theta(&self, h: f64, n: usize) -> f64 {
        self.theta0 + h / self.scale(n)
    }

    /// Local parameter of `theta`.
    pub fn local(&self, theta: f64, n: usize) -> f64 {
        (theta - self.theta0) * self.scale(n)
    }
}

#[derive(Debug, Error)]
pub enum LanError {
    #[error("information matrix is singular or not positive definite")]
    SingularInformation,
    #[error("empty sample")]
    EmptySample,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("log-likelihood ratio is finite at h = {h} outside the support h <= {delta_n}")]
    FiniteOutsideSupport { h: f64, delta_n: f64 },
    #[error("integrated likelihood has no finite term")]
    NoFiniteTerms,
    #[error("need at least one nuisance draw")]
    NoDraws,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Stat(#[from] StatError),
}

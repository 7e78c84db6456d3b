use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{EfficientInfluence, LanError};
use crate::stats::{median, SampleSet};

/// Remainders of a local expansion at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub n: usize,
    pub h: Vec<f64>,
    pub remainder: Vec<f64>,
    pub median_abs: f64,
}

impl ExpansionReport {
    pub fn new(n: usize, h: Vec<f64>, remainder: Vec<f64>) -> Result<Self, LanError> {
        if h.len() != remainder.len() {
            return Err(LanError::DimensionMismatch { expected: h.len(), got: remainder.len() });
        }
        let abs: Vec<f64> = remainder.iter().map(|r| r.abs()).collect();
        Ok(Self { n, h, remainder, median_abs: median(&abs) })
    }
}

/// `Γₙ = n^{-1/2} Σᵢ ℓ̃(Xᵢ)`.
pub fn gamma_n(sample: &SampleSet, infl: &EfficientInfluence) -> Result<Vec<f64>, LanError> {
    score_sum(sample, |x| infl.score(x), infl.dim())
}

fn score_sum(sample: &SampleSet, score: impl Fn(&[f64]) -> Vec<f64>, dim: usize) -> Result<Vec<f64>, LanError> {
    if sample.is_empty() {
        return Err(LanError::EmptySample);
    }
    let mut acc = vec![0.0; dim];
    for x in sample.rows() {
        let s = score(x);
        if s.len() != dim {
            return Err(LanError::DimensionMismatch { expected: dim, got: s.len() });
        }
        for (a, v) in acc.iter_mut().zip(s) {
            *a += v;
        }
    }
    let root_n = (sample.len() as f64).sqrt();
    Ok(acc.into_iter().map(|a| a / root_n).collect())
}

/// `Δ̃ₙ = Ĩ⁻¹ Γₙ`.
pub fn delta_tilde(sample: &SampleSet, infl: &EfficientInfluence) -> Result<Vec<f64>, LanError> {
    infl.solve(&gamma_n(sample, infl)?)
}

/// Outcome of a LAN remainder evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LanRemainder {
    Finite(f64),
    /// The likelihood ratio vanished at `h`: the sample left the support of
    /// the perturbed law, so the expansion fails.
    SupportViolation,
}

impl LanRemainder {
    pub fn value(self) -> Option<f64> {
        match self {
            LanRemainder::Finite(r) => Some(r),
            LanRemainder::SupportViolation => None,
        }
    }
}

/// `log Πᵢ p_{θ₀+h/√n}/p_{θ₀}(Xᵢ) − (hᵀΓₙ − ½ hᵀĨh)`.
pub fn lan_remainder(
    loglik_ratio: impl Fn(&[f64], &SampleSet) -> f64,
    sample: &SampleSet,
    h: &[f64],
    infl: &EfficientInfluence,
) -> Result<LanRemainder, LanError> {
    if h.len() != infl.dim() {
        return Err(LanError::DimensionMismatch { expected: infl.dim(), got: h.len() });
    }
    if h.iter().all(|&v| v == 0.0) {
        return Ok(LanRemainder::Finite(0.0));
    }
    let ratio = loglik_ratio(h, sample);
    if ratio == f64::NEG_INFINITY {
        return Ok(LanRemainder::SupportViolation);
    }
    if !ratio.is_finite() {
        return Err(LanError::InvalidInput(format!("log-likelihood ratio is {ratio} at h = {h:?}")));
    }
    let gamma = gamma_n(sample, infl)?;
    let hv = DVector::from_column_slice(h);
    let linear = hv.dot(&DVector::from_vec(gamma));
    let quad = hv.dot(&(infl.info() * &hv));
    Ok(LanRemainder::Finite(ratio - (linear - 0.5 * quad)))
}

/// Result of a LAE remainder evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaeRemainder {
    /// `log-ratio − hγ` in support; `-inf` outside, where the log-ratio is `-inf`.
    pub remainder: f64,
    pub in_support: bool,
}

/// Remainder of the exponential expansion `log-ratio = hγ + o(1)` valid on
/// `h ≤ Δₙ = n(X₍₁₎ − θ₀)`.
pub fn lae_remainder(
    loglik_ratio: impl Fn(f64, &SampleSet) -> f64,
    sample: &SampleSet,
    h: f64,
    gamma: f64,
    theta0: f64,
) -> Result<LaeRemainder, LanError> {
    if sample.is_empty() {
        return Err(LanError::EmptySample);
    }
    if !(gamma > 0.0) {
        return Err(LanError::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let delta_n = sample.len() as f64 * (sample.min_scalar() - theta0);
    if h == 0.0 {
        return Ok(LaeRemainder { remainder: 0.0, in_support: delta_n >= 0.0 });
    }
    let ratio = loglik_ratio(h, sample);
    if h <= delta_n {
        if !ratio.is_finite() {
            return Err(LanError::InvalidInput(format!("log-likelihood ratio is {ratio} inside the support")));
        }
        Ok(LaeRemainder { remainder: ratio - h * gamma, in_support: true })
    } else if ratio == f64::NEG_INFINITY {
        Ok(LaeRemainder { remainder: f64::NEG_INFINITY, in_support: false })
    } else {
        Err(LanError::FiniteOutsideSupport { h, delta_n })
    }
}

/// `‖√n(θ̂ − θ₀) − I⁻¹ n^{-1/2} Σᵢ ℓ̇(Xᵢ)‖`.
pub fn mle_linearity_gap(
    sample: &SampleSet,
    theta_hat: &[f64],
    score: impl Fn(&[f64]) -> Vec<f64>,
    info: &DMatrix<f64>,
    theta0: &[f64],
) -> Result<f64, LanError> {
    let k = theta0.len();
    if theta_hat.len() != k || info.nrows() != k || info.ncols() != k {
        return Err(LanError::DimensionMismatch { expected: k, got: theta_hat.len() });
    }
    let chol = Cholesky::new(info.clone()).ok_or(LanError::SingularInformation)?;
    let g = DVector::from_vec(score_sum(sample, score, k)?);
    let lin = chol.solve(&g);
    let root_n = (sample.len() as f64).sqrt();
    let diff = DVector::from_fn(k, |i, _| root_n * (theta_hat[i] - theta0[i]) - lin[i]);
    Ok(diff.norm())
}

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::special::{std_normal_cdf, std_normal_quantile, LN_SQRT_2PI};
use super::{SampleSet, StatError};
use crate::rng::SplitRng;

/// Multivariate normal law `N(center, covariance)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct GaussianLaw {
    center: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GaussianRepr {
    center: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRepr> for GaussianLaw {
    type Error = StatError;

    fn try_from(r: GaussianRepr) -> Result<Self, StatError> {
        let k = r.center.len();
        if r.cov.len() != k || r.cov.iter().any(|row| row.len() != k) {
            return Err(StatError::DimensionMismatch { expected: k, got: r.cov.len() });
        }
        let cov = DMatrix::from_fn(k, k, |i, j| r.cov[i][j]);
        GaussianLaw::new(r.center, cov)
    }
}

impl From<GaussianLaw> for GaussianRepr {
    fn from(g: GaussianLaw) -> Self {
        let k = g.dim();
        GaussianRepr {
            center: g.center.iter().copied().collect(),
            cov: (0..k).map(|i| (0..k).map(|j| g.cov[(i, j)]).collect()).collect(),
        }
    }
}

impl PartialEq for GaussianLaw {
    fn eq(&self, other: &Self) -> bool {
        self.center == other.center && self.cov == other.cov
    }
}

impl GaussianLaw {
    pub fn new(center: Vec<f64>, cov: DMatrix<f64>) -> Result<Self, StatError> {
        let k = center.len();
        if k == 0 {
            return Err(StatError::InvalidParameter("gaussian law needs dimension >= 1".into()));
        }
        if cov.nrows() != k || cov.ncols() != k {
            return Err(StatError::DimensionMismatch { expected: k, got: cov.nrows() });
        }
        for i in 0..k {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 {
                    return Err(StatError::NotPositiveDefinite);
                }
            }
        }
        let chol = Cholesky::new(cov.clone()).ok_or(StatError::NotPositiveDefinite)?;
        Ok(Self {
            center: DVector::from_vec(center),
            cov,
            chol,
        })
    }

    /// Scalar normal with mean `mean` and variance `variance`.
    pub fn univariate(mean: f64, variance: f64) -> Result<Self, StatError> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(StatError::InvalidParameter(format!("invalid normal N({mean}, {variance})")));
        }
        Self::new(vec![mean], DMatrix::from_element(1, 1, variance))
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(vec![0.0; dim], DMatrix::identity(dim, dim)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn ln_density(&self, x: &[f64]) -> Result<f64, StatError> {
        if x.len() != self.dim() {
            return Err(StatError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let diff = DVector::from_column_slice(x) - &self.center;
        let l = self.chol.l();
        let z = l
            .solve_lower_triangular(&diff)
            .ok_or(StatError::NotPositiveDefinite)?;
        let half_log_det: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
        Ok(-0.5 * z.norm_squared() - half_log_det - self.dim() as f64 * LN_SQRT_2PI)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64, StatError> {
        self.ln_density(x).map(f64::exp)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.center + self.chol.l() * z).iter().copied().collect()
    }

    fn univariate_params(&self) -> Result<(f64, f64), StatError> {
        if self.dim() != 1 {
            return Err(StatError::UnsupportedMultivariate);
        }
        Ok((self.center[0], self.cov[(0, 0)].sqrt()))
    }
}

/// Negative exponential law `Exp⁻(location, rate)`: density
/// `rate * exp(rate * (x - location))` on `x <= location`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegExpLaw {
    location: f64,
    rate: f64,
}

impl NegExpLaw {
    pub fn new(location: f64, rate: f64) -> Result<Self, StatError> {
        if !(rate > 0.0) || !rate.is_finite() || !location.is_finite() {
            return Err(StatError::InvalidParameter(format!(
                "negative exponential needs finite location and positive rate, got ({location}, {rate})"
            )));
        }
        Ok(Self { location, rate })
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn density(&self, x: f64) -> f64 {
        if x > self.location {
            0.0
        } else {
            self.rate * (self.rate * (x - self.location)).exp()
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x >= self.location {
            1.0
        } else {
            (self.rate * (x - self.location)).exp()
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.location + p.ln() / self.rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = Exp::new(self.rate).expect("positive rate").sample(rng);
        self.location - e
    }
}

/// The two limit families compared against posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Law {
    Gaussian(GaussianLaw),
    NegExp(NegExpLaw),
}

impl From<GaussianLaw> for Law {
    fn from(g: GaussianLaw) -> Self {
        Law::Gaussian(g)
    }
}

impl From<NegExpLaw> for Law {
    fn from(l: NegExpLaw) -> Self {
        Law::NegExp(l)
    }
}

impl Law {
    pub fn dim(&self) -> usize {
        match self {
            Law::Gaussian(g) => g.dim(),
            Law::NegExp(_) => 1,
        }
    }

    /// Analytic density ordinate at `x`.
    pub fn density(&self, x: &[f64]) -> Result<f64, StatError> {
        match self {
            Law::Gaussian(g) => g.density(x),
            Law::NegExp(l) => match x {
                [v] => Ok(l.density(*v)),
                _ => Err(StatError::DimensionMismatch { expected: 1, got: x.len() }),
            },
        }
    }

    /// Density of a univariate law.
    pub fn density_1d(&self, x: f64) -> Result<f64, StatError> {
        self.density(&[x])
    }

    pub fn cdf_1d(&self, x: f64) -> Result<f64, StatError> {
        match self {
            Law::Gaussian(g) => {
                let (m, s) = g.univariate_params()?;
                Ok(std_normal_cdf((x - m) / s))
            }
            Law::NegExp(l) => Ok(l.cdf(x)),
        }
    }

    /// Interval outside of which the law puts mass `tail` in total.
    pub fn effective_support(&self, tail: f64) -> Result<(f64, f64), StatError> {
        match self {
            Law::Gaussian(g) => {
                let (m, s) = g.univariate_params()?;
                let z = -std_normal_quantile(0.5 * tail);
                Ok((m - z * s, m + z * s))
            }
            Law::NegExp(l) => Ok((l.quantile(tail), l.location)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Law::Gaussian(g) => g.sample(rng),
            Law::NegExp(l) => vec![l.sample(rng)],
        }
    }
}

/// `n` i.i.d. draws from `law`.
pub fn sample_law(law: &Law, n: usize, rng: &mut SplitRng) -> Result<SampleSet, StatError> {
    if n == 0 {
        return Err(StatError::EmptySample);
    }
    let dim = law.dim();
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        data.extend(law.sample(rng));
    }
    SampleSet::new(dim, data, rng.seed())
}

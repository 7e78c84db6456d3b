use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::LanError;

/// Real-valued function of one observation.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Vector-valued function of one observation.
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Efficient score function together with the efficient information `Ĩ`.
#[derive(Clone)]
pub struct EfficientInfluence {
    score: VectorFn,
    info: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl fmt::Debug for EfficientInfluence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EfficientInfluence").field("info", &self.info).finish_non_exhaustive()
    }
}

impl EfficientInfluence {
    pub fn new(score: VectorFn, info: DMatrix<f64>) -> Result<Self, LanError> {
        if info.nrows() != info.ncols() || info.nrows() == 0 {
            return Err(LanError::DimensionMismatch { expected: info.nrows(), got: info.ncols() });
        }
        let chol = Cholesky::new(info.clone()).ok_or(LanError::SingularInformation)?;
        Ok(Self { score, info, chol })
    }

    /// One-dimensional parameter with scalar score.
    pub fn scalar(score: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, info: f64) -> Result<Self, LanError> {
        if !(info > 0.0) || !info.is_finite() {
            return Err(LanError::SingularInformation);
        }
        Self::new(Arc::new(move |x: &[f64]| vec![score(x)]), DMatrix::from_element(1, 1, info))
    }

    pub fn dim(&self) -> usize {
        self.info.nrows()
    }

    pub fn info(&self) -> &DMatrix<f64> {
        &self.info
    }

    /// `Ĩ` of a one-dimensional parameter.
    pub fn scalar_info(&self) -> f64 {
        self.info[(0, 0)]
    }

    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        (self.score)(x)
    }

    pub fn score_fn(&self) -> &VectorFn {
        &self.score
    }

    /// `Ĩ⁻¹ v` by the stored Cholesky factor.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>, LanError> {
        if v.len() != self.dim() {
            return Err(LanError::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(self.chol.solve(&DVector::from_column_slice(v)).iter().copied().collect())
    }

    /// `Ĩ⁻¹`.
    pub fn inverse_info(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

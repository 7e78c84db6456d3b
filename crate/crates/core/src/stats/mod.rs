//! Probability laws, tabulated densities and the distances between them.

mod density;
mod distance;
mod law;
mod sample;
pub mod summary;
pub mod special;

pub use density::{freedman_diaconis_density, histogram_density, linspace, trapezoid, GridDensity};
pub(crate) use density::{dual_cell_counts, dual_cell_widths};
pub use distance::{hellinger_distance, tabulate_law, tv_distance, tv_to_law, LAW_TAIL_MASS};
pub use law::{sample_law, GaussianLaw, Law, NegExpLaw};
pub use sample::SampleSet;
pub use summary::{empirical_quantile, kolmogorov_distance, median};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatError {
    #[error("grid needs at least two points, got {len}")]
    GridTooShort { len: usize },
    #[error("grid is not strictly increasing at index {index}")]
    NonMonotoneGrid { index: usize },
    #[error("grid has {grid} points but {values} ordinates were given")]
    LengthMismatch { grid: usize, values: usize },
    #[error("negative density ordinate at index {index}")]
    NegativeValue { index: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("density has zero total mass")]
    ZeroMass,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("operation supports univariate laws only")]
    UnsupportedMultivariate,
    #[error("empty sample")]
    EmptySample,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StatError;

/// A probability density tabulated on a strictly increasing grid.
///
/// Between nodes the density is the linear interpolant of the ordinates and it
/// is zero outside `[grid[0], grid[last]]`. Construction rescales the ordinates
/// so that the trapezoid integral is one, which is also the exact integral of
/// the interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct GridDensity {
    grid: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<DensityRepr> for GridDensity {
    type Error = StatError;

    fn try_from(r: DensityRepr) -> Result<Self, StatError> {
        GridDensity::new(r.grid, r.values)
    }
}

impl From<GridDensity> for DensityRepr {
    fn from(d: GridDensity) -> Self {
        DensityRepr { grid: d.grid, values: d.values }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    x: f64,
    density: f64,
}

fn validate_grid(grid: &[f64]) -> Result<(), StatError> {
    if grid.len() < 2 {
        return Err(StatError::GridTooShort { len: grid.len() });
    }
    for (i, &x) in grid.iter().enumerate() {
        if !x.is_finite() {
            return Err(StatError::NonFinite { index: i });
        }
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(StatError::NonMonotoneGrid { index: i + 1 });
    }
    Ok(())
}

/// Trapezoid integral of ordinates `values` over `grid`.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `n` equispaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

impl GridDensity {
    /// Normalizes `raw_values` on `grid`.
    pub fn new(grid: Vec<f64>, raw_values: Vec<f64>) -> Result<Self, StatError> {
        validate_grid(&grid)?;
        if raw_values.len() != grid.len() {
            return Err(StatError::LengthMismatch {
                grid: grid.len(),
                values: raw_values.len(),
            });
        }
        for (i, &v) in raw_values.iter().enumerate() {
            if !v.is_finite() {
                return Err(StatError::NonFinite { index: i });
            }
            if v < 0.0 {
                return Err(StatError::NegativeValue { index: i });
            }
        }
        let mass = trapezoid(&grid, &raw_values);
        if !(mass > 0.0) {
            return Err(StatError::ZeroMass);
        }
        // Already normalized input is kept as is, so that a serialized
        // density reads back bit for bit.
        if (mass - 1.0).abs() <= 1e-13 {
            return Ok(Self { grid, values: raw_values });
        }
        let values = raw_values.into_iter().map(|v| v / mass).collect();
        Ok(Self { grid, values })
    }

    /// Builds a density from log-ordinates, stabilized by the maximum.
    pub fn from_log_values(grid: Vec<f64>, log_values: &[f64]) -> Result<Self, StatError> {
        if let Some(i) = log_values.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(StatError::NonFinite { index: i });
        }
        let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(StatError::ZeroMass);
        }
        let raw = log_values.iter().map(|&l| (l - max).exp()).collect();
        Self::new(grid, raw)
    }

    /// Tabulates `f` on `grid`.
    pub fn tabulate(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self, StatError> {
        let raw = grid.iter().map(|&x| f(x)).collect();
        Self::new(grid, raw)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lower(&self) -> f64 {
        self.grid[0]
    }

    pub fn upper(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// Index `i` with `grid[i] <= x < grid[i + 1]`, clamped to valid segments.
    fn segment(&self, x: f64) -> usize {
        let i = self.grid.partition_point(|&g| g <= x);
        i.saturating_sub(1).min(self.grid.len() - 2)
    }

    /// Density at `x`; zero outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.lower() || x > self.upper() {
            return 0.0;
        }
        let i = self.segment(x);
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let t = (x - x0) / (x1 - x0);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Cumulative mass at every node.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.grid.len());
        let mut total = 0.0;
        acc.push(0.0);
        for i in 0..self.grid.len() - 1 {
            total += 0.5 * (self.grid[i + 1] - self.grid[i]) * (self.values[i] + self.values[i + 1]);
            acc.push(total);
        }
        acc
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower() {
            return 0.0;
        }
        if x >= self.upper() {
            return 1.0;
        }
        let cum = self.cumulative();
        let i = self.segment(x);
        let w = self.grid[i + 1] - self.grid[i];
        let t = x - self.grid[i];
        let slope = (self.values[i + 1] - self.values[i]) / w;
        (cum[i] + self.values[i] * t + 0.5 * slope * t * t).min(1.0)
    }

    /// Left-continuous inverse of the CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let cum = self.cumulative();
        self.quantile_with(&cum, p)
    }

    pub(crate) fn quantile_with(&self, cum: &[f64], p: f64) -> f64 {
        let target = p * cum[cum.len() - 1];
        let i = cum.partition_point(|&c| c < target).clamp(1, cum.len() - 1) - 1;
        let w = self.grid[i + 1] - self.grid[i];
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let rem = (target - cum[i]).max(0.0);
        let slope = (f1 - f0) / w;
        // solve f0 t + slope t^2 / 2 = rem on [0, w]
        let t = if slope.abs() < 1e-14 * (f0 + f1).max(1e-300) / w {
            if f0 > 0.0 {
                rem / f0
            } else {
                0.0
            }
        } else {
            let disc = (f0 * f0 + 2.0 * slope * rem).max(0.0);
            2.0 * rem / (f0 + disc.sqrt()).max(1e-300)
        };
        self.grid[i] + t.clamp(0.0, w)
    }

    /// Central interval carrying mass `level`.
    pub fn central_interval(&self, level: f64) -> (f64, f64) {
        let cum = self.cumulative();
        let tail = 0.5 * (1.0 - level);
        (self.quantile_with(&cum, tail), self.quantile_with(&cum, 1.0 - tail))
    }

    /// Exact mean of the interpolant.
    pub fn mean(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, f)| {
                let (a, b) = (x[0], x[1]);
                (b - a) * (f[0] * (2.0 * a + b) + f[1] * (a + 2.0 * b)) / 6.0
            })
            .sum()
    }

    /// Exact variance of the interpolant.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let second: f64 = self
            .grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, f)| {
                let (a, b) = (x[0] - m, x[1] - m);
                (b - a) / 12.0
                    * (f[0] * (3.0 * a * a + 2.0 * a * b + b * b)
                        + f[1] * (a * a + 2.0 * a * b + 3.0 * b * b))
            })
            .sum();
        second.max(0.0)
    }

    /// Grid node carrying the largest ordinate.
    pub fn argmax(&self) -> f64 {
        let i = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0;
        self.grid[i]
    }

    /// Mass of `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.cdf(b) - self.cdf(a)).clamp(0.0, 1.0)
    }

    /// Pushes the density forward through `x -> offset + scale * x`, `scale > 0`.
    pub fn affine(&self, offset: f64, scale: f64) -> Result<GridDensity, StatError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(StatError::InvalidParameter(format!("affine scale must be positive, got {scale}")));
        }
        let grid = self.grid.iter().map(|&x| offset + scale * x).collect();
        GridDensity::new(grid, self.values.clone())
    }

    /// One draw by inversion of the CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let cum = self.cumulative();
        self.quantile_with(&cum, rng.random::<f64>())
    }

    /// `n` draws by inversion, sharing one CDF table.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let cum = self.cumulative();
        (0..n).map(|_| self.quantile_with(&cum, rng.random::<f64>())).collect()
    }

    /// Writes CSV with header `x,density`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), StatError> {
        let mut w = csv::Writer::from_writer(writer);
        for (&x, &density) in self.grid.iter().zip(&self.values) {
            w.serialize(CsvRow { x, density })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads CSV with header `x,density`; ordinates are renormalized.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, StatError> {
        let mut r = csv::Reader::from_reader(reader);
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for row in r.deserialize::<CsvRow>() {
            let row = row?;
            grid.push(row.x);
            values.push(row.density);
        }
        Self::new(grid, values)
    }
}

/// Histogram of `draws` on the dual cells of `grid`.
///
/// Node `i` owns the cell between the midpoints to its neighbours (clipped to
/// the grid range at both ends), so cell widths equal the trapezoid weights
/// and the returned ordinates integrate to the fraction of draws inside the
/// grid before renormalization.
pub fn histogram_density(draws: &[f64], grid: &[f64]) -> Result<GridDensity, StatError> {
    validate_grid(grid)?;
    let counts = dual_cell_counts(draws, grid);
    let widths = dual_cell_widths(grid);
    let raw: Vec<f64> = counts.iter().zip(&widths).map(|(&c, &w)| c / w).collect();
    GridDensity::new(grid.to_vec(), raw)
}

pub(crate) fn dual_cell_widths(grid: &[f64]) -> Vec<f64> {
    let m = grid.len();
    (0..m)
        .map(|i| {
            let left = if i == 0 { grid[0] } else { 0.5 * (grid[i - 1] + grid[i]) };
            let right = if i == m - 1 { grid[m - 1] } else { 0.5 * (grid[i] + grid[i + 1]) };
            right - left
        })
        .collect()
}

pub(crate) fn dual_cell_counts(draws: &[f64], grid: &[f64]) -> Vec<f64> {
    let m = grid.len();
    let mids: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut counts = vec![0.0; m];
    for &x in draws {
        if x < grid[0] || x > grid[m - 1] || x.is_nan() {
            continue;
        }
        let i = mids.partition_point(|&mid| mid <= x);
        counts[i] += 1.0;
    }
    counts
}

/// Histogram whose spacing follows the Freedman–Diaconis rule.
pub fn freedman_diaconis_density(draws: &[f64]) -> Result<GridDensity, StatError> {
    if draws.len() < 2 {
        return Err(StatError::EmptySample);
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let mut width = 2.0 * iqr / (sorted.len() as f64).cbrt();
    if !(width > 0.0) {
        width = ((hi - lo) / 10.0).max(1e-12);
    }
    let cells = (((hi - lo) / width).ceil() as usize).max(1);
    let grid = linspace(lo, lo + cells as f64 * width, cells + 1);
    histogram_density(draws, &grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::special::std_normal_pdf;

    #[test]
    fn uniform_normalization() {
        let d = GridDensity::new(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.values(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn triangle_already_normalized() {
        let d = GridDensity::new(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(d.values(), &[0.0, 2.0]);
        assert!((d.mean() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_ordinates_recovered() {
        let grid = linspace(-5.0, 5.0, 1001);
        let raw = grid.iter().map(|x| (-0.5 * x * x).exp()).collect();
        let d = GridDensity::new(grid.clone(), raw).unwrap();
        for (x, v) in grid.iter().zip(d.values()) {
            assert!((v - std_normal_pdf(*x)).abs() < 1e-6);
        }
    }

    #[test]
    fn validation_errors_are_distinct() {
        assert!(matches!(
            GridDensity::new(vec![0.0, 2.0, 1.0], vec![1.0; 3]),
            Err(StatError::NonMonotoneGrid { index: 2 })
        ));
        assert!(matches!(GridDensity::new(vec![0.0, 1.0], vec![0.0, 0.0]), Err(StatError::ZeroMass)));
        assert!(matches!(
            GridDensity::new(vec![0.0, 1.0], vec![1.0, -1.0]),
            Err(StatError::NegativeValue { index: 1 })
        ));
        assert!(matches!(
            GridDensity::new(vec![0.0, 1.0], vec![1.0]),
            Err(StatError::LengthMismatch { .. })
        ));
        assert!(matches!(GridDensity::new(vec![0.0], vec![1.0]), Err(StatError::GridTooShort { .. })));
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = GridDensity::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 1.0]).unwrap();
        for &p in &[0.01, 0.2, 0.5, 0.77, 0.99] {
            let x = d.quantile(p);
            assert!((d.cdf(x) - p).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn variance_of_uniform() {
        let d = GridDensity::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!((d.variance() - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip() {
        let d = GridDensity::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x,density\n"));
        let back = GridDensity::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn histogram_of_constant_draws_sits_in_one_cell() {
        let grid = linspace(0.0, 1.0, 11);
        let d = histogram_density(&[0.42; 50], &grid).unwrap();
        let peak = d.values().iter().position(|&v| v > 0.0).unwrap();
        assert_eq!(grid[peak], 0.4);
        assert_eq!(d.values().iter().filter(|&&v| v > 0.0).count(), 1);
    }
}

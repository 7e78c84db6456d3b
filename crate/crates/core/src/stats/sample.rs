use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::StatError;

/// An ordered set of observations of fixed dimension together with the seed
/// that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
    seed: u64,
}

impl SampleSet {
    /// `data` holds `data.len() / dim` rows, row-major.
    pub fn new(dim: usize, data: Vec<f64>, seed: u64) -> Result<Self, StatError> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(StatError::DimensionMismatch { expected: dim, got: data.len() });
        }
        if data.is_empty() {
            return Err(StatError::EmptySample);
        }
        Ok(Self { dim, data, seed })
    }

    pub fn from_rows(rows: &[Vec<f64>], seed: u64) -> Result<Self, StatError> {
        let dim = rows.first().map(Vec::len).ok_or(StatError::EmptySample)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(StatError::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data, seed)
    }

    pub fn scalar(values: Vec<f64>, seed: u64) -> Result<Self, StatError> {
        Self::new(1, values, seed)
    }

    /// Writes one row per observation under the given column names.
    pub fn write_csv<W: Write>(&self, columns: &[&str], writer: W) -> Result<(), StatError> {
        if columns.len() != self.dim {
            return Err(StatError::DimensionMismatch { expected: self.dim, got: columns.len() });
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(columns)?;
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads CSV written by [`SampleSet::write_csv`]; the header must equal
    /// `columns`.
    pub fn read_csv<R: Read>(columns: &[&str], reader: R, seed: u64) -> Result<Self, StatError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?;
        if header.iter().ne(columns.iter().copied()) {
            return Err(StatError::InvalidParameter(format!(
                "expected columns {}, found {}",
                columns.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut data = Vec::new();
        for record in r.deserialize::<Vec<f64>>() {
            let row = record?;
            if row.len() != columns.len() {
                return Err(StatError::DimensionMismatch { expected: columns.len(), got: row.len() });
            }
            data.extend(row);
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(StatError::NonFinite { index });
        }
        Self::new(columns.len(), data, seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Smallest value of a scalar sample.
    pub fn min_scalar(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sample mean vector and covariance matrix (divisor `n - 1`).
    pub fn mean_and_covariance(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.len() as f64;
        let d = self.dim;
        let mut mean = vec![0.0; d];
        for r in self.rows() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut cov = vec![vec![0.0; d]; d];
        for r in self.rows() {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
                }
            }
        }
        let denom = (n - 1.0).max(1.0);
        cov.iter_mut().flatten().for_each(|c| *c /= denom);
        (mean, cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let s = SampleSet::new(3, vec![1.0, -2.5, 0.125, 4.0, 1e-300, 0.7], 9).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&["y", "u", "v"], &mut buf).unwrap();
        assert!(buf.starts_with(b"y,u,v\n"));
        assert_eq!(SampleSet::read_csv(&["y", "u", "v"], buf.as_slice(), 9).unwrap(), s);
        assert!(SampleSet::read_csv(&["x"], buf.as_slice(), 9).is_err());
        assert!(s.write_csv(&["x"], Vec::new()).is_err());
    }
}

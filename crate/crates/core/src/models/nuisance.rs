use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::stats::linspace;

/// A function on `[0, 1]` given by its values at knots, interpolated
/// linearly and held constant beyond the outer knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathRepr", into = "PathRepr")]
pub struct NuisancePath {
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PathRepr {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<PathRepr> for NuisancePath {
    type Error = ModelError;

    fn try_from(r: PathRepr) -> Result<Self, ModelError> {
        NuisancePath::new(r.knots, r.values)
    }
}

impl From<NuisancePath> for PathRepr {
    fn from(p: NuisancePath) -> Self {
        PathRepr { knots: p.knots, values: p.values }
    }
}

impl NuisancePath {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, ModelError> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(ModelError::InvalidConfig(format!(
                "path needs equally many knots and values, got {} and {}",
                knots.len(),
                values.len()
            )));
        }
        if knots.iter().any(|k| !(0.0..=1.0).contains(k)) {
            return Err(ModelError::InvalidConfig("path knots must lie in [0, 1]".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::InvalidConfig("path knots must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidConfig("path values must be finite".into()));
        }
        Ok(Self { knots, values })
    }

    /// `m` equispaced knots on `[0, 1]`.
    pub fn equispaced_knots(m: usize) -> Vec<f64> {
        if m == 1 {
            vec![0.5]
        } else {
            linspace(0.0, 1.0, m)
        }
    }

    /// `f` sampled at `m` equispaced knots.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self, ModelError> {
        let knots = Self::equispaced_knots(m);
        let values = knots.iter().map(|&k| f(k)).collect();
        Self::new(knots, values)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![0.0, 1.0], vec![c, c]).expect("constant path is valid")
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn eval(&self, v: f64) -> f64 {
        let (i, w) = locate(&self.knots, v);
        if w == 0.0 {
            self.values[i]
        } else {
            (1.0 - w) * self.values[i] + w * self.values[i + 1]
        }
    }

    /// Same path with every value mapped through `f`.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.knots.iter().zip(&self.values).map(|(&k, &v)| f(k, v)).collect();
        Self { knots: self.knots.clone(), values }
    }

    /// This path resampled at `knots`.
    pub fn resample(&self, knots: &[f64]) -> Result<Self, ModelError> {
        Self::new(knots.to_vec(), knots.iter().map(|&k| self.eval(k)).collect())
    }

    /// Breakpoints of the path on `[0, 1]`, including both ends.
    fn pieces(&self) -> Vec<f64> {
        let mut pts = vec![0.0];
        pts.extend(self.knots.iter().copied().filter(|&k| k > 0.0 && k < 1.0));
        pts.push(1.0);
        pts
    }

    /// `∫₀¹ η` and `∫₀¹ η²`, exact for the interpolant.
    pub fn moments(&self) -> (f64, f64) {
        let pts = self.pieces();
        let (mut m1, mut m2) = (0.0, 0.0);
        for w in pts.windows(2) {
            let (a, b) = (self.eval(w[0]), self.eval(w[1]));
            let len = w[1] - w[0];
            m1 += len * 0.5 * (a + b);
            m2 += len * (a * a + a * b + b * b) / 3.0;
        }
        (m1, m2)
    }

    /// `max |η|` over the knots, which is the sup norm of the interpolant.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete Hölder seminorm `max_{i<j} |η(tⱼ) − η(tᵢ)| / |tⱼ − tᵢ|^α` over knot pairs.
    pub fn holder_seminorm(&self, alpha: f64) -> f64 {
        holder_seminorm(&self.knots, &self.values, alpha)
    }
}

pub(crate) fn holder_seminorm(knots: &[f64], values: &[f64], alpha: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..knots.len() {
        for j in i + 1..knots.len() {
            let q = (values[j] - values[i]).abs() / (knots[j] - knots[i]).powf(alpha);
            best = best.max(q);
        }
    }
    best
}

/// Index `i` and weight `w` with `x ≈ (1 − w)·kᵢ + w·kᵢ₊₁`, clamped to the ends.
pub(crate) fn locate(knots: &[f64], x: f64) -> (usize, f64) {
    let m = knots.len();
    if m == 1 || x <= knots[0] {
        return (0, 0.0);
    }
    if x >= knots[m - 1] {
        return (m - 1, 0.0);
    }
    let j = knots.partition_point(|&k| k <= x);
    let i = j - 1;
    (i, (x - knots[i]) / (knots[j] - knots[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_clamping() {
        let p = NuisancePath::new(vec![0.2, 0.6], vec![1.0, 3.0]).unwrap();
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(0.2), 1.0);
        assert!((p.eval(0.4) - 2.0).abs() < 1e-15);
        assert_eq!(p.eval(0.6), 3.0);
        assert_eq!(p.eval(1.0), 3.0);
    }

    #[test]
    fn invalid_paths() {
        assert!(NuisancePath::new(vec![0.5, 0.5], vec![0.0, 0.0]).is_err());
        assert!(NuisancePath::new(vec![-0.1], vec![0.0]).is_err());
        assert!(NuisancePath::new(vec![0.1], vec![f64::NAN]).is_err());
        assert!(serde_json::from_str::<NuisancePath>(r#"{"knots":[0.3,0.1],"values":[0,0]}"#).is_err());
    }

    #[test]
    fn moments_of_linear_path() {
        let p = NuisancePath::from_fn(5, |v| 2.0 * v).unwrap();
        let (m1, m2) = p.moments();
        assert!((m1 - 1.0).abs() < 1e-15);
        assert!((m2 - 4.0 / 3.0).abs() < 1e-14);
        let clamped = NuisancePath::new(vec![0.5], vec![2.0]).unwrap();
        assert_eq!(clamped.moments(), (2.0, 4.0));
    }

    #[test]
    fn holder_of_line() {
        let p = NuisancePath::from_fn(11, |v| v).unwrap();
        assert!((p.holder_seminorm(1.0) - 1.0).abs() < 1e-12);
        // for α < 1 the widest pair dominates a line
        assert!((p.holder_seminorm(0.5) - 1.0).abs() < 1e-12);
        assert_eq!(p.sup_norm(), 1.0);
    }
}

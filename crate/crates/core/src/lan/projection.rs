use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{EfficientInfluence, LanError, ScalarFn};
use crate::stats::SampleSet;

/// Least-squares projection of a scalar score onto a nuisance score span,
/// computed with empirical inner products under a `P₀` sample.
#[derive(Clone)]
pub struct Projection {
    score: ScalarFn,
    /// Coefficients `cⱼ` of the nuisance scores.
    pub coefficients: Vec<f64>,
    /// Empirical second moment of the residual, the estimate of `Ĩ`.
    pub info: f64,
    /// Standard error of `info`.
    pub info_se: f64,
    /// Empirical `P₀ℓ̇²`.
    pub ordinary_info: f64,
    /// Empirical second moment of the fitted nuisance part.
    pub fitted_info: f64,
    /// Ridge added to the Gram diagonal, zero when none was needed.
    pub ridge: f64,
    /// Empirical inner products of the residual with each basis element.
    pub orthogonality: Vec<f64>,
    /// Their Monte Carlo standard errors.
    pub orthogonality_se: Vec<f64>,
    /// `P₀ℓ̇² − info − fitted_info`, and its standard error.
    pub pythagoras_gap: f64,
    pub pythagoras_se: f64,
    pub sample_size: usize,
}

impl std::fmt::Debug for Projection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Projection")
            .field("coefficients", &self.coefficients)
            .field("info", &self.info)
            .field("ridge", &self.ridge)
            .finish_non_exhaustive()
    }
}

impl Projection {
    pub fn score(&self, x: &[f64]) -> f64 {
        (self.score)(x)
    }

    /// Fails with [`LanError::SingularInformation`] when the residual is
    /// numerically zero, i.e. the parameter is not identifiable from the
    /// nuisance directions.
    pub fn into_influence(self) -> Result<EfficientInfluence, LanError> {
        if !(self.info > 1e-12 * self.ordinary_info.max(f64::MIN_POSITIVE)) {
            return Err(LanError::SingularInformation);
        }
        let score = self.score;
        EfficientInfluence::new(Arc::new(move |x: &[f64]| vec![score(x)]), DMatrix::from_element(1, 1, self.info))
    }
}

fn mean_and_se(sum: f64, sum_sq: f64, n: f64) -> (f64, f64) {
    let m = sum / n;
    let var = ((sum_sq / n - m * m) * n / (n - 1.0).max(1.0)).max(0.0);
    (m, (var / n).sqrt())
}

/// Projects `ordinary_score` onto the span of `basis` in empirical `L₂(P₀)`
/// and returns the residual as the efficient score.
///
/// Two passes over the sample: the first accumulates the Gram matrix and the
/// cross moments, the second the residual moments and standard errors.
pub fn project_efficient_score(
    ordinary_score: ScalarFn,
    basis: Vec<ScalarFn>,
    p0_sample: &SampleSet,
) -> Result<Projection, LanError> {
    if p0_sample.is_empty() {
        return Err(LanError::EmptySample);
    }
    let k = basis.len();
    let n = p0_sample.len() as f64;
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut cross = DVector::<f64>::zeros(k);
    let mut g = vec![0.0; k];
    for x in p0_sample.rows() {
        let l = ordinary_score(x);
        for (gj, b) in g.iter_mut().zip(&basis) {
            *gj = b(x);
        }
        for i in 0..k {
            cross[i] += l * g[i];
            for j in 0..=i {
                gram[(i, j)] += g[i] * g[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    gram /= n;
    cross /= n;

    let trace = gram.trace();
    let (coefficients, ridge) = if k == 0 || !(trace > 0.0) {
        (vec![0.0; k], 0.0)
    } else {
        solve_with_ridge(&gram, &cross, trace / k as f64)?
    };

    let mut l2 = (0.0, 0.0);
    let mut r2 = (0.0, 0.0);
    let mut f2 = 0.0;
    let mut gap = (0.0, 0.0);
    let mut orth = vec![(0.0, 0.0); k];
    for x in p0_sample.rows() {
        let l = ordinary_score(x);
        let mut fit = 0.0;
        for (gj, b) in g.iter_mut().zip(&basis) {
            *gj = b(x);
        }
        for (c, gj) in coefficients.iter().zip(&g) {
            fit += c * gj;
        }
        let r = l - fit;
        l2.0 += l * l;
        l2.1 += l.powi(4);
        r2.0 += r * r;
        r2.1 += r.powi(4);
        f2 += fit * fit;
        let cross_term = 2.0 * r * fit;
        gap.0 += cross_term;
        gap.1 += cross_term * cross_term;
        for (o, gj) in orth.iter_mut().zip(&g) {
            let v = r * gj;
            o.0 += v;
            o.1 += v * v;
        }
    }
    let (info, info_se) = mean_and_se(r2.0, r2.1, n);
    let (pythagoras_gap, pythagoras_se) = mean_and_se(gap.0, gap.1, n);
    let (orthogonality, orthogonality_se) = orth.iter().map(|&(s, s2)| mean_and_se(s, s2, n)).unzip();

    let coefs = coefficients.clone();
    let score: ScalarFn = Arc::new(move |x: &[f64]| {
        let fit: f64 = coefs.iter().zip(&basis).map(|(c, b)| c * b(x)).sum();
        ordinary_score(x) - fit
    });
    Ok(Projection {
        score,
        coefficients,
        info,
        info_se,
        ordinary_info: l2.0 / n,
        fitted_info: f2 / n,
        ridge,
        orthogonality,
        orthogonality_se,
        pythagoras_gap,
        pythagoras_se,
        sample_size: p0_sample.len(),
    })
}

fn solve_with_ridge(gram: &DMatrix<f64>, cross: &DVector<f64>, mean_diag: f64) -> Result<(Vec<f64>, f64), LanError> {
    let well_posed = Cholesky::new(gram.clone()).filter(|c| {
        let d = c.l_dirty().diagonal();
        d.iter().all(|v| v * v > 1e-12 * mean_diag)
    });
    let (chol, ridge) = match well_posed {
        Some(c) => (c, 0.0),
        None => {
            let ridge = 1e-10 * mean_diag;
            let mut g = gram.clone();
            for i in 0..g.nrows() {
                g[(i, i)] += ridge;
            }
            (Cholesky::new(g).ok_or(LanError::SingularInformation)?, ridge)
        }
    };
    Ok((chol.solve(cross).iter().copied().collect(), ridge))
}

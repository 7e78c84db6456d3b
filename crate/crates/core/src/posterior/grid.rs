use super::PosteriorError;
use crate::stats::GridDensity;

/// Posterior on `grid` proportional to `exp(loglik + logprior)`.
///
/// Evaluation is log-sum-exp stabilized, so likelihoods that are enormous or
/// tiny in absolute terms are handled. Every ordinate being `-inf` means the
/// likelihood and prior supports do not meet on the grid.
pub fn grid_posterior(
    loglik: impl Fn(f64) -> f64,
    logprior: impl Fn(f64) -> f64,
    grid: &[f64],
) -> Result<GridDensity, PosteriorError> {
    let logs: Vec<f64> = grid.iter().map(|&x| loglik(x) + logprior(x)).collect();
    grid_posterior_from_log(grid.to_vec(), logs)
}

/// Normalizes precomputed unnormalized log-posterior ordinates.
pub fn grid_posterior_from_log(grid: Vec<f64>, logs: Vec<f64>) -> Result<GridDensity, PosteriorError> {
    if let Some(i) = logs.iter().position(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(PosteriorError::InvalidLogDensity(vec![grid.get(i).copied().unwrap_or(f64::NAN)]));
    }
    if logs.iter().all(|&l| l == f64::NEG_INFINITY) {
        return Err(PosteriorError::ZeroPosteriorMass);
    }
    Ok(GridDensity::from_log_values(grid, &logs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::special::normal_ln_pdf;
    use crate::stats::{linspace, tv_distance};

    #[test]
    fn flat_likelihood_returns_prior() {
        let grid = linspace(-3.0, 3.0, 601);
        let post = grid_posterior(|_| 0.0, |x| normal_ln_pdf(x, 0.5, 1.0), &grid).unwrap();
        let prior = GridDensity::tabulate(grid.clone(), |x| normal_ln_pdf(x, 0.5, 1.0).exp()).unwrap();
        assert!(tv_distance(&post, &prior) < 1e-12);
    }

    #[test]
    fn conjugate_normal() {
        // x̄ = 0.3 from n = 25 unit-variance observations, prior N(1, 4)
        let (xbar, n, m0, v0): (f64, f64, f64, f64) = (0.3, 25.0, 1.0, 4.0);
        let post_prec = n + 1.0 / v0;
        let post_mean = (n * xbar + m0 / v0) / post_prec;
        let post_sd = post_prec.recip().sqrt();
        let grid = linspace(post_mean - 10.0 * post_sd, post_mean + 10.0 * post_sd, 4001);
        let post = grid_posterior(
            |t| -0.5 * n * (xbar - t) * (xbar - t),
            |t| normal_ln_pdf(t, m0, v0.sqrt()),
            &grid,
        )
        .unwrap();
        let exact = GridDensity::tabulate(grid.clone(), |t| normal_ln_pdf(t, post_mean, post_sd).exp()).unwrap();
        assert!(tv_distance(&post, &exact) < 1e-6);
    }

    #[test]
    fn truncation_gives_uniform() {
        let grid = linspace(0.0, 4.0, 401);
        let post = grid_posterior(
            |x| if (1.0..=3.0).contains(&x) { 0.0 } else { f64::NEG_INFINITY },
            |_| 0.0,
            &grid,
        )
        .unwrap();
        let inside = post.mass_between(0.99, 3.01);
        assert!(inside > 1.0 - 1e-12, "mass inside {inside}");
        assert!((post.eval(2.0) - 0.5).abs() < 0.01);
        assert!((post.eval(1.5) - post.eval(2.5)).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_is_an_error() {
        let grid = linspace(0.0, 1.0, 11);
        assert!(matches!(
            grid_posterior(|_| f64::NEG_INFINITY, |_| 0.0, &grid),
            Err(PosteriorError::ZeroPosteriorMass)
        ));
        assert!(matches!(
            grid_posterior(|_| f64::NAN, |_| 0.0, &grid),
            Err(PosteriorError::InvalidLogDensity(_))
        ));
    }

    #[test]
    fn huge_log_values_are_stable() {
        let grid = linspace(0.0, 1.0, 101);
        let a = grid_posterior(|x| 1e3 - 50.0 * x * x, |_| 0.0, &grid).unwrap();
        let b = grid_posterior(|x| -50.0 * x * x, |_| 0.0, &grid).unwrap();
        assert!(tv_distance(&a, &b) < 1e-12);
    }
}

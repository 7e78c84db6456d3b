use super::{Chain, PosteriorError};

/// Effective sample size of one chain coordinate by Geyer's initial positive
/// sequence estimator.
pub fn effective_sample_size(chain: &Chain, coordinate: usize) -> Result<f64, PosteriorError> {
    if coordinate >= chain.dim() {
        return Err(PosteriorError::NoSuchCoordinate { coordinate, dim: chain.dim() });
    }
    ess_of(&chain.coordinate(coordinate))
}

/// Effective sample size of a scalar series; `1` for a constant series.
pub fn ess_of(series: &[f64]) -> Result<f64, PosteriorError> {
    let n = series.len();
    if n < 10 {
        return Err(PosteriorError::ChainTooShort { len: n, min: 10 });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let gamma0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(gamma0 > 1e-300) || !gamma0.is_finite() {
        return Ok(1.0);
    }
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    // tau = -1 + 2 * sum_m (rho_{2m} + rho_{2m+1}) over the initial positive run
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = if m == 0 {
            1.0 + autocov(1) / gamma0
        } else {
            (autocov(2 * m) + autocov(2 * m + 1)) / gamma0
        };
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    let tau = tau.max(1.0 / n as f64);
    Ok((n as f64 / tau).clamp(1.0, n as f64))
}

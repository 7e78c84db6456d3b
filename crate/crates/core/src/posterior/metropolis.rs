use rand::Rng;
use rand_distr::StandardNormal;

use super::{Chain, LogTarget, PosteriorError};
use crate::rng::SplitRng;

const ADAPT_BATCH: usize = 50;
const MAX_DEFAULT_BURN_IN: usize = 10_000;
const MIN_VARIANCE_SAMPLES: usize = 200;

/// Settings for [`rw_metropolis`].
#[derive(Debug, Clone)]
pub struct MetropolisConfig {
    /// Total iterations including burn-in.
    pub steps: usize,
    /// Burn-in length; `min(steps / 5, 10_000)` when unset.
    pub burn_in: Option<usize>,
    /// Adapt proposal scales during burn-in.
    pub adapt: bool,
    /// Initial per-coordinate proposal standard deviations; `1` when empty.
    pub initial_scales: Vec<f64>,
}

impl MetropolisConfig {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            burn_in: None,
            adapt: true,
            initial_scales: Vec::new(),
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or_else(|| (self.steps / 5).min(MAX_DEFAULT_BURN_IN))
    }
}

/// Target acceptance rate for a random-walk proposal in `dim` dimensions.
pub fn target_acceptance(dim: usize) -> f64 {
    if dim == 1 {
        0.44
    } else {
        0.234
    }
}

/// Gaussian random-walk Metropolis.
///
/// During burn-in the proposal is `x + λ s ⊙ z`: the per-coordinate scales `s`
/// track running posterior standard deviations and the global factor `λ` is
/// moved batch-wise toward the target acceptance rate. Both freeze when
/// burn-in ends and only post-burn-in states are stored.
pub fn rw_metropolis(
    target: &dyn LogTarget,
    init: &[f64],
    config: &MetropolisConfig,
    rng: &mut SplitRng,
) -> Result<Chain, PosteriorError> {
    let dim = target.dim();
    if init.len() != dim {
        return Err(PosteriorError::DimensionMismatch { expected: dim, got: init.len() });
    }
    let burn_in = config.burn_in();
    if config.steps == 0 || config.steps <= burn_in {
        return Err(PosteriorError::StepsBelowBurnIn { steps: config.steps, burn_in });
    }
    let eval = |x: &[f64]| -> Result<f64, PosteriorError> {
        let v = target.log_density(x);
        if v.is_nan() || v == f64::INFINITY {
            Err(PosteriorError::InvalidLogDensity(x.to_vec()))
        } else {
            Ok(v)
        }
    };

    let mut x = init.to_vec();
    let mut logp = eval(&x)?;
    if logp == f64::NEG_INFINITY {
        return Err(PosteriorError::InitOutsideSupport);
    }

    let base_scales: Vec<f64> = if config.initial_scales.len() == dim {
        config.initial_scales.clone()
    } else {
        vec![1.0; dim]
    };
    let mut scales = base_scales.clone();
    let mut log_lambda = 0.0f64;
    let target_rate = target_acceptance(dim);

    // Welford accumulators for burn-in variance estimates
    let mut count = 0usize;
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];

    let mut chain = Chain::new(dim);
    chain.push_scale(1.0);
    let mut batch_accepts = 0usize;
    let mut batch_index = 0usize;
    let mut proposal = vec![0.0; dim];

    for step in 0..config.steps {
        let lambda = log_lambda.exp();
        for j in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            proposal[j] = x[j] + lambda * scales[j] * z;
        }
        let prop_logp = eval(&proposal)?;
        let accept = prop_logp > f64::NEG_INFINITY && {
            let log_ratio = prop_logp - logp;
            log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
        };
        if accept {
            x.copy_from_slice(&proposal);
            logp = prop_logp;
        }

        if step < burn_in {
            if config.adapt {
                batch_accepts += accept as usize;
                count += 1;
                for j in 0..dim {
                    let delta = x[j] - mean[j];
                    mean[j] += delta / count as f64;
                    m2[j] += delta * (x[j] - mean[j]);
                }
                if (step + 1) % ADAPT_BATCH == 0 {
                    batch_index += 1;
                    let rate = batch_accepts as f64 / ADAPT_BATCH as f64;
                    let gain = (1.0 / (batch_index as f64).sqrt()).min(1.0);
                    log_lambda += gain * (rate - target_rate) * 4.0;
                    batch_accepts = 0;
                    if count >= MIN_VARIANCE_SAMPLES {
                        for j in 0..dim {
                            let sd = (m2[j] / (count - 1) as f64).sqrt();
                            if sd.is_finite() && sd > 0.0 {
                                scales[j] = sd;
                            }
                        }
                    }
                    chain.push_scale(log_lambda.exp());
                }
            }
        } else {
            chain.push(&x, logp, accept);
        }
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::FnTarget;

    fn std_normal() -> FnTarget<impl Fn(&[f64]) -> f64 + Sync> {
        FnTarget::new(1, |x: &[f64]| -0.5 * x[0] * x[0])
    }

    #[test]
    fn standard_normal_moments() {
        let chain = rw_metropolis(&std_normal(), &[0.0], &MetropolisConfig::new(100_000), &mut SplitRng::new(1)).unwrap();
        let xs = chain.coordinate(0);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(m.abs() < 0.05, "mean {m}");
        assert!((0.9..=1.1).contains(&v), "var {v}");
        assert!((0.3..0.6).contains(&chain.accept_rate()), "rate {}", chain.accept_rate());
    }

    #[test]
    fn support_is_preserved() {
        let t = FnTarget::new(1, |x: &[f64]| if x[0] <= 0.5 { x[0] } else { f64::NEG_INFINITY });
        let chain = rw_metropolis(&t, &[0.0], &MetropolisConfig::new(20_000), &mut SplitRng::new(2)).unwrap();
        assert!(chain.coordinate(0).iter().all(|&x| x <= 0.5));
    }

    #[test]
    fn reruns_are_bit_identical() {
        let cfg = MetropolisConfig::new(5_000);
        let a = rw_metropolis(&std_normal(), &[0.3], &cfg, &mut SplitRng::new(99)).unwrap();
        let b = rw_metropolis(&std_normal(), &[0.3], &cfg, &mut SplitRng::new(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_inputs() {
        let t = FnTarget::new(1, |x: &[f64]| if x[0] < 0.0 { f64::NEG_INFINITY } else { 0.0 });
        assert!(matches!(
            rw_metropolis(&t, &[-1.0], &MetropolisConfig::new(100), &mut SplitRng::new(1)),
            Err(PosteriorError::InitOutsideSupport)
        ));
        let mut cfg = MetropolisConfig::new(100);
        cfg.burn_in = Some(100);
        assert!(matches!(
            rw_metropolis(&t, &[1.0], &cfg, &mut SplitRng::new(1)),
            Err(PosteriorError::StepsBelowBurnIn { .. })
        ));
        let nan = FnTarget::new(1, |_: &[f64]| f64::NAN);
        assert!(matches!(
            rw_metropolis(&nan, &[1.0], &MetropolisConfig::new(100), &mut SplitRng::new(1)),
            Err(PosteriorError::InvalidLogDensity(_))
        ));
    }
}

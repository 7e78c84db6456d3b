use rayon::prelude::*;

use super::{gamma_n, EfficientInfluence, LanError, LocalFrame};
use crate::stats::special::log_sum_exp;
use crate::stats::SampleSet;

fn log_mean_exp(terms: &[f64]) -> Result<f64, LanError> {
    let lse = log_sum_exp(terms);
    if lse == f64::NEG_INFINITY {
        return Err(LanError::NoFiniteTerms);
    }
    if lse.is_nan() {
        return Err(LanError::InvalidInput("log-likelihood returned NaN".into()));
    }
    Ok(lse - (terms.len() as f64).ln())
}

/// Monte Carlo estimate of `log sₙ(h)` relative to the likelihood at the truth:
/// `log (1/J) Σⱼ exp[ℓ(θₙ(h), ηⱼ) − ℓ(θ₀, η₀)]` for prior draws `ηⱼ`.
///
/// The same draws must be reused for every `h` so that ratios across `h`
/// share their Monte Carlo noise.
pub fn integrated_likelihood<N, L>(
    sample: &SampleSet,
    h: f64,
    prior_draws: &[N],
    eta0: &N,
    loglik: &L,
    frame: &LocalFrame,
) -> Result<f64, LanError>
where
    N: Sync,
    L: Fn(f64, &N, &SampleSet) -> f64 + Sync,
{
    if prior_draws.is_empty() {
        return Err(LanError::NoDraws);
    }
    let base = loglik(frame.theta0, eta0, sample);
    if !base.is_finite() {
        return Err(LanError::InvalidInput(format!("log-likelihood at the truth is {base}")));
    }
    let theta = frame.theta(h, sample.len());
    let terms: Vec<f64> = prior_draws.par_iter().map(|eta| loglik(theta, eta, sample) - base).collect();
    log_mean_exp(&terms)
}

/// `log(sₙ(h)/sₙ(0)) − (hΓₙ − ½h²Ĩ)` with `sₙ` estimated from common prior draws.
pub fn ilan_remainder<N, L>(
    sample: &SampleSet,
    h: f64,
    prior_draws: &[N],
    eta0: &N,
    loglik: &L,
    frame: &LocalFrame,
    infl: &EfficientInfluence,
) -> Result<f64, LanError>
where
    N: Sync,
    L: Fn(f64, &N, &SampleSet) -> f64 + Sync,
{
    if h == 0.0 {
        return Ok(0.0);
    }
    let at_h = integrated_likelihood(sample, h, prior_draws, eta0, loglik, frame)?;
    let at_0 = integrated_likelihood(sample, 0.0, prior_draws, eta0, loglik, frame)?;
    local_quadratic_gap(at_h - at_0, sample, h, infl)
}

/// `log(sₙ(h)/sₙ(0))` estimated from draws of the nuisance posterior given
/// `θ = θ₀`: `sₙ(h)/sₙ(0) = E[Πᵢ p_{θₙ(h),η}/p_{θ₀,η}(Xᵢ) | θ₀, X]`.
///
/// Unlike prior draws, these concentrate where the likelihood does, so the
/// average does not degenerate as `n` grows.
pub fn integrated_likelihood_ratio<N, L>(
    sample: &SampleSet,
    h: f64,
    posterior_draws: &[N],
    loglik: &L,
    frame: &LocalFrame,
) -> Result<f64, LanError>
where
    N: Sync,
    L: Fn(f64, &N, &SampleSet) -> f64 + Sync,
{
    if posterior_draws.is_empty() {
        return Err(LanError::NoDraws);
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    let theta = frame.theta(h, sample.len());
    let terms: Vec<f64> = posterior_draws
        .par_iter()
        .map(|eta| loglik(theta, eta, sample) - loglik(frame.theta0, eta, sample))
        .collect();
    log_mean_exp(&terms)
}

/// ILAN remainder from draws of the nuisance posterior given `θ = θ₀`.
pub fn ilan_remainder_conditional<N, L>(
    sample: &SampleSet,
    h: f64,
    posterior_draws: &[N],
    loglik: &L,
    frame: &LocalFrame,
    infl: &EfficientInfluence,
) -> Result<f64, LanError>
where
    N: Sync,
    L: Fn(f64, &N, &SampleSet) -> f64 + Sync,
{
    if h == 0.0 {
        return Ok(0.0);
    }
    let log_ratio = integrated_likelihood_ratio(sample, h, posterior_draws, loglik, frame)?;
    local_quadratic_gap(log_ratio, sample, h, infl)
}

fn local_quadratic_gap(log_ratio: f64, sample: &SampleSet, h: f64, infl: &EfficientInfluence) -> Result<f64, LanError> {
    if infl.dim() != 1 {
        return Err(LanError::DimensionMismatch { expected: 1, got: infl.dim() });
    }
    let gamma = gamma_n(sample, infl)?[0];
    Ok(log_ratio - (h * gamma - 0.5 * h * h * infl.scalar_info()))
}

#[cfg(test)]
mod tests {
    use super::super::{lan_remainder, LocalRate};
    use super::*;
    use crate::rng::SplitRng;
    use crate::stats::{sample_law, GaussianLaw, Law};

    fn gaussian_sample(n: usize, seed: u64) -> SampleSet {
        let law = Law::from(GaussianLaw::standard(1));
        sample_law(&law, n, &mut SplitRng::new(seed)).unwrap()
    }

    // Location model N(θ + η, 1), with η a scalar nuisance.
    fn loglik(theta: f64, eta: &f64, s: &SampleSet) -> f64 {
        s.rows().map(|x| -0.5 * (x[0] - theta - eta).powi(2)).sum()
    }

    #[test]
    fn point_mass_prior_gives_plain_ratio() {
        let s = gaussian_sample(40, 1);
        let frame = LocalFrame::new(0.0, LocalRate::SqrtN);
        let h = 0.7;
        let got = integrated_likelihood(&s, h, &[0.0], &0.0, &loglik, &frame).unwrap();
        let t = h / (40f64).sqrt();
        let direct = loglik(t, &0.0, &s) - loglik(0.0, &0.0, &s);
        assert!((got - direct).abs() < 1e-12);
        assert_eq!(integrated_likelihood(&s, 0.0, &[0.0], &0.0, &loglik, &frame).unwrap(), 0.0);
    }

    #[test]
    fn point_mass_ilan_is_lan() {
        let s = gaussian_sample(60, 2);
        let frame = LocalFrame::new(0.0, LocalRate::SqrtN);
        let infl = EfficientInfluence::scalar(|x| x[0], 1.0).unwrap();
        let draws = vec![0.0; 3];
        for &h in &[-1.0, 0.5, 2.0] {
            let ilan = ilan_remainder(&s, h, &draws, &0.0, &loglik, &frame, &infl).unwrap();
            let ratio = |hv: &[f64], s: &SampleSet| loglik(hv[0] / (60f64).sqrt(), &0.0, s) - loglik(0.0, &0.0, s);
            let lan = lan_remainder(ratio, &s, &[h], &infl).unwrap().value().unwrap();
            assert!((ilan - lan).abs() < 1e-10);
        }
        assert_eq!(ilan_remainder(&s, 0.0, &draws, &0.0, &loglik, &frame, &infl).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let s = gaussian_sample(5, 3);
        let frame = LocalFrame::new(0.0, LocalRate::SqrtN);
        let empty: Vec<f64> = vec![];
        assert!(matches!(
            integrated_likelihood(&s, 1.0, &empty, &0.0, &loglik, &frame),
            Err(LanError::NoDraws)
        ));
        let dead = |_: f64, _: &f64, _: &SampleSet| f64::NEG_INFINITY;
        assert!(integrated_likelihood(&s, 1.0, &[0.0], &0.0, &dead, &frame).is_err());
        let partly = |t: f64, e: &f64, s: &SampleSet| if *e > 0.0 { f64::NEG_INFINITY } else { loglik(t, e, s) };
        assert!(matches!(
            integrated_likelihood_ratio(&s, 1.0, &[1.0, 2.0], &partly, &frame),
            Err(LanError::NoFiniteTerms)
        ));
    }

    #[test]
    fn common_draws_are_deterministic() {
        let s = gaussian_sample(30, 4);
        let frame = LocalFrame::new(0.0, LocalRate::SqrtN);
        let infl = EfficientInfluence::scalar(|x| x[0], 1.0).unwrap();
        let draws: Vec<f64> = {
            let law = Law::from(GaussianLaw::univariate(0.0, 0.01).unwrap());
            sample_law(&law, 200, &mut SplitRng::new(8)).unwrap().column(0)
        };
        let a = ilan_remainder(&s, 1.2, &draws, &0.0, &loglik, &frame, &infl).unwrap();
        let b = ilan_remainder(&s, 1.2, &draws, &0.0, &loglik, &frame, &infl).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn conditional_estimator_with_exact_posterior() {
        // η ~ N(0, τ²): the ratio has a closed form through x̄ alone.
        let n = 100usize;
        let tau2 = 0.5;
        let s = gaussian_sample(n, 5);
        let xbar = s.column(0).iter().sum::<f64>() / n as f64;
        let nf = n as f64;
        let frame = LocalFrame::new(0.0, LocalRate::SqrtN);
        // Posterior of η given θ = 0: N(nτ²x̄/(1+nτ²), τ²/(1+nτ²)).
        let post_var = tau2 / (1.0 + nf * tau2);
        let post_mean = nf * tau2 * xbar / (1.0 + nf * tau2);
        let law = Law::from(GaussianLaw::univariate(post_mean, post_var).unwrap());
        let draws = sample_law(&law, 20_000, &mut SplitRng::new(6)).unwrap().column(0);
        let h = 0.8;
        let got = integrated_likelihood_ratio(&s, h, &draws, &loglik, &frame).unwrap();
        // Marginal of x̄ given θ: N(θ, 1/n + τ²); the ratio depends on x̄ only.
        let v = 1.0 / nf + tau2;
        let t = h / nf.sqrt();
        let exact = -0.5 * ((xbar - t).powi(2) - xbar.powi(2)) / v;
        assert!((got - exact).abs() < 0.01, "got {got} exact {exact}");
    }
}

//! Normal location mixtures `p_{σ,F}(x) = ∫ φ_σ(x − z) dF(z)` with `F` a
//! distribution on `[0, 1]`, a Dirichlet process prior on `F` and a prior on
//! the kernel scale `σ`.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::lan::{project_efficient_score, EfficientInfluence, Projection, ScalarFn};
use crate::posterior::{ess_of, Chain};
use crate::rng::SplitRng;
use crate::stats::special::std_normal_pdf;
use crate::stats::{linspace, GridDensity, SampleSet};

const ESS_FLOOR: f64 = 20.0;
const AUX_ATOMS: usize = 3;
const SIGMA_POINTS: usize = 201;
const SIGMA_WINDOW: f64 = 10.0;
const LOCATION_STEPS: usize = 2;
const RB_TERMS: usize = 2000;
const RB_POINTS: usize = 801;
const EM_TOL: f64 = 1e-10;
const EM_MAX_ITERS: usize = 10_000;

fn phi(sigma: f64, x: f64) -> f64 {
    std_normal_pdf(x / sigma) / sigma
}

/// A finitely supported mixing distribution on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixingRepr", into = "MixingRepr")]
pub struct MixingDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MixingRepr {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<MixingRepr> for MixingDistribution {
    type Error = ModelError;

    fn try_from(r: MixingRepr) -> Result<Self, ModelError> {
        MixingDistribution::new(r.atoms, r.weights)
    }
}

impl From<MixingDistribution> for MixingRepr {
    fn from(f: MixingDistribution) -> Self {
        MixingRepr { atoms: f.atoms, weights: f.weights }
    }
}

#[derive(Serialize, Deserialize)]
struct AtomRow {
    atom: f64,
    weight: f64,
}

impl MixingDistribution {
    /// Atoms must lie in `[0, 1]` and weights sum to one within `1e-9`; the
    /// weights are then rescaled to sum to one exactly.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self, ModelError> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(ModelError::InvalidConfig(format!(
                "mixing distribution needs equally many atoms and weights, got {} and {}",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(ModelError::InvalidConfig("atoms must lie in [0, 1]".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ModelError::InvalidConfig("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidConfig(format!("weights sum to {total}, not 1")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { atoms, weights })
    }

    pub fn point_mass(z: f64) -> Result<Self, ModelError> {
        Self::new(vec![z], vec![1.0])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return *a;
            }
        }
        self.atoms[self.atoms.len() - 1]
    }

    /// CSV with header `atom,weight`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ModelError> {
        let mut w = csv::Writer::from_writer(writer);
        for (&atom, &weight) in self.atoms.iter().zip(&self.weights) {
            w.serialize(AtomRow { atom, weight }).map_err(crate::stats::StatError::from)?;
        }
        w.flush().map_err(crate::stats::StatError::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, ModelError> {
        let mut r = csv::Reader::from_reader(reader);
        let (mut atoms, mut weights) = (Vec::new(), Vec::new());
        for row in r.deserialize::<AtomRow>() {
            let row = row.map_err(crate::stats::StatError::from)?;
            atoms.push(row.atom);
            weights.push(row.weight);
        }
        Self::new(atoms, weights)
    }
}

/// `Σⱼ wⱼ φ_σ(x − zⱼ)`.
pub fn mixture_density(sigma: f64, f: &MixingDistribution, x: f64) -> f64 {
    f.atoms.iter().zip(&f.weights).map(|(z, w)| w * phi(sigma, x - z)).sum()
}

/// `∂_σ log p_{σ,F}(x)`.
pub fn mixture_sigma_score(sigma: f64, f: &MixingDistribution, x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (z, w) in f.atoms.iter().zip(&f.weights) {
        let d = x - z;
        let k = w * phi(sigma, d);
        den += k;
        num += k * (d * d / sigma.powi(3) - 1.0 / sigma);
    }
    num / den
}

/// Lower and upper envelopes `(L(x), U(x))` of the mixture model over
/// `σ ∈ [σ₋, σ₊]` and all mixing distributions on `[0, 1]`:
///
/// `U(x) = (σ₊/σ₋)(φ_{σ₊}(x)1{x<0} + φ_{σ₊}(x−1)1{x>1} + φ_{σ₊}(0)1{−M≤x≤M})`,
/// `L(x) = (σ₋/σ₊)(φ_{σ₋}(x−1)1{x<1/2} + φ_{σ₋}(x)1{x≥1/2})`,
///
/// with `M = m_env`. The shifted terms measure the distance from `x` to the
/// nearest (upper) and farthest (lower) point of `[0, 1]`.
pub fn mixture_envelope(x: f64, sigma_minus: f64, sigma_plus: f64, m_env: f64) -> Result<(f64, f64), ModelError> {
    if !(sigma_minus > 0.0 && sigma_minus < sigma_plus) {
        return Err(ModelError::InvalidInput(format!("need 0 < σ₋ < σ₊, got {sigma_minus} and {sigma_plus}")));
    }
    if !(m_env > 1.0) {
        return Err(ModelError::InvalidInput(format!("envelope constant must exceed 1, got {m_env}")));
    }
    let ratio = sigma_plus / sigma_minus;
    let mut upper = 0.0;
    if x < 0.0 {
        upper += phi(sigma_plus, x);
    }
    if x > 1.0 {
        upper += phi(sigma_plus, x - 1.0);
    }
    if (-m_env..=m_env).contains(&x) {
        upper += phi(sigma_plus, 0.0);
    }
    let lower = if x < 0.5 { phi(sigma_minus, x - 1.0) } else { phi(sigma_minus, x) };
    Ok((lower / ratio, upper * ratio))
}

/// Checks `L(x) ≤ p_{σ,F}(x) ≤ U(x)` at every combination of the given
/// scales, mixing distributions and points. Relative slack `1e-12` absorbs
/// rounding; points where all three underflow to zero pass.
pub fn validate_envelope(
    sigmas: &[f64],
    mixings: &[MixingDistribution],
    xs: &[f64],
    sigma_minus: f64,
    sigma_plus: f64,
    m_env: f64,
) -> Result<(), ModelError> {
    for &sigma in sigmas {
        if !(sigma_minus..=sigma_plus).contains(&sigma) {
            return Err(ModelError::InvalidInput(format!("σ = {sigma} outside [{sigma_minus}, {sigma_plus}]")));
        }
    }
    for &x in xs {
        let (lower, upper) = mixture_envelope(x, sigma_minus, sigma_plus, m_env)?;
        for &sigma in sigmas {
            for f in mixings {
                let p = mixture_density(sigma, f, x);
                if p < lower * (1.0 - 1e-12) || p > upper * (1.0 + 1e-12) {
                    return Err(ModelError::EnvelopeViolation { x, sigma, lower, density: p, upper });
                }
            }
        }
    }
    Ok(())
}

/// Kernel scale, truth and priors for the mixture model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixtureConfig {
    pub sigma0: f64,
    pub f0: MixingDistribution,
    pub sigma_range: [f64; 2],
    /// Total mass of the Dirichlet process.
    pub dp_mass: f64,
    /// Base measure of the Dirichlet process, a density on `[0, 1]`.
    pub dp_base: GridDensity,
    pub sigma_prior: GridDensity,
    /// Replaces the Dirichlet process by a single cluster fixed at this
    /// location, which leaves the pure scale model `N(z, σ²)`.
    pub fixed_location: Option<f64>,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        let sigma_range = [0.05, 1.0];
        Self {
            sigma0: 0.25,
            f0: MixingDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5]).expect("valid default"),
            sigma_range,
            dp_mass: 1.0,
            dp_base: GridDensity::new(vec![0.0, 1.0], vec![1.0, 1.0]).expect("valid default"),
            sigma_prior: GridDensity::new(sigma_range.to_vec(), vec![1.0, 1.0]).expect("valid default"),
            fixed_location: None,
        }
    }
}

impl MixtureConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let [lo, hi] = self.sigma_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(ModelError::InvalidConfig(format!("sigma_range must satisfy 0 < σ₋ < σ₊, got [{lo}, {hi}]")));
        }
        if !(self.sigma0 > lo && self.sigma0 < hi) {
            return Err(ModelError::InvalidConfig(format!("sigma0 = {} is not inside ({lo}, {hi})", self.sigma0)));
        }
        if !(self.dp_mass > 0.0 && self.dp_mass.is_finite()) {
            return Err(ModelError::InvalidConfig("dp_mass must be positive".into()));
        }
        let base = &self.dp_base;
        if base.lower() != 0.0 || base.upper() != 1.0 || base.values().iter().any(|&v| v <= 0.0) {
            return Err(ModelError::InvalidConfig("dp_base must be a strictly positive density on exactly [0, 1]".into()));
        }
        let tol = 1e-12 * hi;
        if self.sigma_prior.lower() < lo - tol || self.sigma_prior.upper() > hi + tol {
            return Err(ModelError::InvalidConfig("sigma_prior must live inside sigma_range".into()));
        }
        if let Some(z) = self.fixed_location {
            if !(0.0..=1.0).contains(&z) {
                return Err(ModelError::InvalidConfig("fixed_location must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    fn ln_sigma_prior(&self, sigma: f64) -> f64 {
        if sigma < self.sigma_prior.lower() || sigma > self.sigma_prior.upper() {
            f64::NEG_INFINITY
        } else {
            self.sigma_prior.eval(sigma).ln()
        }
    }
}

/// `X = Z + e` with `Z ~ F₀` and `e ~ N(0, σ₀²)`.
pub fn mixture_generate(config: &MixtureConfig, n: usize, rng: &mut SplitRng) -> Result<SampleSet, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidInput("sample size must be positive".into()));
    }
    let xs = (0..n)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            config.f0.sample(rng) + config.sigma0 * e
        })
        .collect();
    Ok(SampleSet::scalar(xs, rng.seed())?)
}

/// Sampler state: cluster labels, occupied cluster locations and the scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub assignments: Vec<usize>,
    pub cluster_locations: Vec<f64>,
    pub sigma: f64,
}

/// Output of [`dp_gibbs`].
///
/// `trace` holds `(σ, number of clusters)` per stored sweep, with the
/// `σ`-log-likelihood as log value. `sum_sq` holds `Σᵢ (Xᵢ − z_{cᵢ})²` per
/// stored sweep, the statistic through which `σ` depends on the rest.
#[derive(Debug, Clone)]
pub struct MixtureChain {
    pub trace: Chain,
    pub sum_sq: Vec<f64>,
    pub final_state: ClusterState,
    pub ess: f64,
    pub location_accept_rate: f64,
    n: usize,
    config: MixtureConfig,
}

impl MixtureChain {
    pub fn sigma_draws(&self) -> Vec<f64> {
        self.trace.coordinate(0)
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// Marginal posterior density of `σ`, averaging the exact conditionals
    /// `p(σ | rest) ∝ π(σ) σ⁻ⁿ exp(−S/(2σ²))` over stored sweeps. The grid
    /// spans the draws plus eight conditional standard deviations, clipped to
    /// the prior support.
    pub fn sigma_density(&self) -> Result<GridDensity, ModelError> {
        let draws = self.sigma_draws();
        let n = self.n as f64;
        let (lo_d, hi_d) = draws.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
        let pad = 8.0 * hi_d / (2.0 * n).sqrt();
        let lo = (lo_d - pad).max(self.config.sigma_prior.lower());
        let hi = (hi_d + pad).min(self.config.sigma_prior.upper());
        let grid = linspace(lo, hi, RB_POINTS);
        let ln_prior: Vec<f64> = grid.iter().map(|&s| self.config.ln_sigma_prior(s)).collect();
        let stride = self.sum_sq.len().div_ceil(RB_TERMS).max(1);
        let mut acc = vec![0.0; grid.len()];
        let mut terms = 0usize;
        for &s in self.sum_sq.iter().step_by(stride) {
            let logs: Vec<f64> =
                grid.iter().zip(&ln_prior).map(|(&sg, &lp)| lp - n * sg.ln() - s / (2.0 * sg * sg)).collect();
            let cond = GridDensity::from_log_values(grid.clone(), &logs)?;
            for (a, v) in acc.iter_mut().zip(cond.values()) {
                *a += v;
            }
            terms += 1;
        }
        for a in &mut acc {
            *a /= terms as f64;
        }
        Ok(GridDensity::new(grid, acc)?)
    }
}

struct Clusters {
    loc: Vec<f64>,
    count: Vec<usize>,
    sum: Vec<f64>,
}

impl Clusters {
    fn open(&mut self, z: f64) -> usize {
        if let Some(k) = self.count.iter().position(|&c| c == 0) {
            self.loc[k] = z;
            k
        } else {
            self.loc.push(z);
            self.count.push(0);
            self.sum.push(0.0);
            self.loc.len() - 1
        }
    }

    fn add(&mut self, k: usize, x: f64) {
        self.count[k] += 1;
        self.sum[k] += x;
    }

    fn remove(&mut self, k: usize, x: f64) {
        self.count[k] -= 1;
        self.sum[k] -= x;
        if self.count[k] == 0 {
            self.sum[k] = 0.0;
        }
    }
}

fn sum_sq(xs: &[f64], labels: &[usize], loc: &[f64]) -> f64 {
    xs.iter().zip(labels).map(|(x, &c)| (x - loc[c]).powi(2)).sum()
}

/// Draws `σ` from `π(σ) σ⁻ⁿ exp(−S/(2σ²))` on a 201-point grid centred at
/// `√(S/n)` and spanning ten approximate posterior standard deviations each
/// way, clipped to the prior support.
fn draw_sigma(config: &MixtureConfig, n: f64, s: f64, rng: &mut SplitRng) -> Result<f64, ModelError> {
    let (plo, phi_) = (config.sigma_prior.lower(), config.sigma_prior.upper());
    let hat = (s / n).sqrt();
    let sd = hat.max(plo) / (2.0 * n).sqrt();
    let mut lo = (hat - SIGMA_WINDOW * sd).clamp(plo, phi_);
    let mut hi = (hat + SIGMA_WINDOW * sd).clamp(plo, phi_);
    if hi - lo < 1e-9 * phi_ {
        lo = plo;
        hi = phi_;
    }
    let grid = linspace(lo, hi, SIGMA_POINTS);
    let logs: Vec<f64> =
        grid.iter().map(|&sg| config.ln_sigma_prior(sg) - n * sg.ln() - s / (2.0 * sg * sg)).collect();
    let cond = GridDensity::from_log_values(grid, &logs)?;
    Ok(cond.sample(rng))
}

/// Gibbs sampler for `(σ, F)` under a Dirichlet process prior on `F`.
///
/// Each sweep reassigns every observation by Neal's auxiliary-atom scheme
/// with three fresh atoms from the base measure, moves each occupied
/// cluster location by random-walk Metropolis on `[0, 1]`, and draws `σ`
/// from its full conditional on a grid. The first fifth of the sweeps (at
/// most 10⁴) is discarded.
pub fn dp_gibbs(sample: &SampleSet, config: &MixtureConfig, iters: usize, rng: &mut SplitRng) -> Result<MixtureChain, ModelError> {
    config.validate()?;
    if sample.is_empty() || sample.dim() != 1 {
        return Err(ModelError::InvalidInput("mixture samples are nonempty and scalar".into()));
    }
    let burn_in = (iters / 5).min(10_000);
    if iters <= burn_in + 1 {
        return Err(ModelError::InvalidInput(format!("{iters} iterations leave nothing after burn-in")));
    }
    let xs = sample.as_flat();
    let n = xs.len();
    let nf = n as f64;
    let base = &config.dp_base;
    let base_cum = base.cumulative();
    let ln_base = |z: f64| base.eval(z).ln();
    let aux_weight = (config.dp_mass / AUX_ATOMS as f64).ln();

    // start from ten clusters spread over [0, 1], each point at its nearest
    let mut cl = Clusters { loc: Vec::new(), count: Vec::new(), sum: Vec::new() };
    let mut labels = vec![0usize; n];
    match config.fixed_location {
        Some(z) => {
            cl.open(z);
            for (i, &x) in xs.iter().enumerate() {
                cl.add(0, x);
                labels[i] = 0;
            }
        }
        None => {
            for j in 0..10 {
                cl.loc.push(0.05 + 0.1 * j as f64);
                cl.count.push(0);
                cl.sum.push(0.0);
            }
            for (i, &x) in xs.iter().enumerate() {
                let k = (x.clamp(0.0, 0.999_999) * 10.0) as usize;
                labels[i] = k;
                cl.add(k, x);
            }
        }
    }
    let mut sigma = {
        let s = sum_sq(xs, &labels, &cl.loc);
        (s / nf).sqrt().clamp(config.sigma_prior.lower(), config.sigma_prior.upper())
    };

    let mut trace = Chain::new(2);
    let mut stored_s = Vec::with_capacity(iters - burn_in);
    let (mut loc_acc, mut loc_prop) = (0usize, 0usize);
    let mut logw: Vec<f64> = Vec::new();
    let mut aux = [0.0; AUX_ATOMS];

    for it in 0..iters {
        let inv2 = 1.0 / (2.0 * sigma * sigma);
        if config.fixed_location.is_none() {
            for i in 0..n {
                let x = xs[i];
                let c = labels[i];
                cl.remove(c, x);
                let mut first_aux = 0;
                if cl.count[c] == 0 {
                    // the vacated location becomes the first auxiliary atom
                    aux[0] = cl.loc[c];
                    first_aux = 1;
                }
                for a in aux.iter_mut().skip(first_aux) {
                    *a = base.quantile_with(&base_cum, rng.random());
                }
                logw.clear();
                for k in 0..cl.loc.len() {
                    logw.push(if cl.count[k] > 0 {
                        (cl.count[k] as f64).ln() - (x - cl.loc[k]).powi(2) * inv2
                    } else {
                        f64::NEG_INFINITY
                    });
                }
                for a in &aux {
                    logw.push(aux_weight - (x - a).powi(2) * inv2);
                }
                let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for w in logw.iter_mut() {
                    *w = (*w - top).exp();
                    total += *w;
                }
                let mut u = rng.random::<f64>() * total;
                let mut pick = logw.len() - 1;
                for (j, w) in logw.iter().enumerate() {
                    if u < *w {
                        pick = j;
                        break;
                    }
                    u -= w;
                }
                let k = if pick < cl.loc.len() {
                    pick
                } else {
                    let z = aux[pick - cl.loc.len()];
                    if cl.count[c] == 0 {
                        cl.loc[c] = z;
                        c
                    } else {
                        cl.open(z)
                    }
                };
                cl.add(k, x);
                labels[i] = k;
            }
            for k in 0..cl.loc.len() {
                if cl.count[k] == 0 {
                    continue;
                }
                let m = cl.count[k] as f64;
                let target = |z: f64| ln_base(z) - (m * z * z - 2.0 * z * cl.sum[k]) * inv2;
                let step = 2.4 * sigma / m.sqrt();
                let mut z = cl.loc[k];
                let mut cur = target(z);
                for _ in 0..LOCATION_STEPS {
                    let e: f64 = rng.sample(StandardNormal);
                    let prop = z + step * e;
                    loc_prop += 1;
                    if !(0.0..=1.0).contains(&prop) {
                        continue;
                    }
                    let val = target(prop);
                    if rng.random::<f64>().ln() < val - cur {
                        z = prop;
                        cur = val;
                        loc_acc += 1;
                    }
                }
                cl.loc[k] = z;
            }
        }
        let s = sum_sq(xs, &labels, &cl.loc);
        sigma = draw_sigma(config, nf, s, rng)?;
        if it >= burn_in {
            let k = cl.count.iter().filter(|&&c| c > 0).count();
            let ll = -nf * sigma.ln() - s / (2.0 * sigma * sigma);
            trace.push(&[sigma, k as f64], ll, true);
            stored_s.push(s);
        }
    }

    let ess = ess_of(&trace.coordinate(0))?;
    if !(ess >= ESS_FLOOR) {
        return Err(ModelError::Diagnostics(format!("ESS of sigma is {ess:.1}, below {ESS_FLOOR}")));
    }
    // compact labels onto occupied clusters
    let mut remap = vec![usize::MAX; cl.loc.len()];
    let mut locations = Vec::new();
    for (k, &c) in cl.count.iter().enumerate() {
        if c > 0 {
            remap[k] = locations.len();
            locations.push(cl.loc[k]);
        }
    }
    let final_state = ClusterState {
        assignments: labels.iter().map(|&c| remap[c]).collect(),
        cluster_locations: locations,
        sigma,
    };
    Ok(MixtureChain {
        trace,
        sum_sq: stored_s,
        final_state,
        ess,
        location_accept_rate: if loc_prop > 0 { loc_acc as f64 / loc_prop as f64 } else { 0.0 },
        n,
        config: config.clone(),
    })
}

/// `−∫ p₀ log p_{σ,F}` by the trapezoid rule on `p0`'s grid.
pub fn kl_objective(sigma: f64, p0: &GridDensity, f: &MixingDistribution) -> f64 {
    let w = trapezoid_weights(p0);
    p0.grid().iter().zip(&w).map(|(&x, &wx)| if wx > 0.0 { -wx * mixture_density(sigma, f, x).ln() } else { 0.0 }).sum()
}

fn trapezoid_weights(p0: &GridDensity) -> Vec<f64> {
    let g = p0.grid();
    let m = g.len();
    (0..m)
        .map(|i| {
            let left = if i > 0 { g[i] - g[i - 1] } else { 0.0 };
            let right = if i + 1 < m { g[i + 1] - g[i] } else { 0.0 };
            0.5 * (left + right) * p0.values()[i]
        })
        .collect()
}

/// Mixing distribution on `z_grid` minimizing `−∫ p₀ log p_{σ,F}`, by EM
/// (multiplicative gradient) iterations from uniform weights. Stops when the
/// objective decreases by less than `1e-10` or after 10⁴ iterations.
pub fn kl_minimizer_f(sigma: f64, p0: &GridDensity, z_grid: &[f64]) -> Result<MixingDistribution, ModelError> {
    if !(sigma > 0.0) {
        return Err(ModelError::InvalidInput("sigma must be positive".into()));
    }
    if z_grid.is_empty() || z_grid.iter().any(|z| !(0.0..=1.0).contains(z)) {
        return Err(ModelError::InvalidInput("z_grid must be a nonempty subset of [0, 1]".into()));
    }
    let wx = trapezoid_weights(p0);
    let keep: Vec<usize> = (0..wx.len()).filter(|&i| wx[i] > 0.0).collect();
    let kernel: Vec<Vec<f64>> = keep.iter().map(|&i| z_grid.iter().map(|z| phi(sigma, p0.grid()[i] - z)).collect()).collect();
    let q = z_grid.len();
    let mut w = vec![1.0 / q as f64; q];
    let mut prev = f64::INFINITY;
    for _ in 0..EM_MAX_ITERS {
        let mut next = vec![0.0; q];
        let mut obj = 0.0;
        for (row, &i) in kernel.iter().zip(&keep) {
            let p: f64 = row.iter().zip(&w).map(|(k, wj)| k * wj).sum();
            if !(p > 0.0) {
                return Err(ModelError::InvalidInput(format!("mixture density underflows at x = {}", p0.grid()[i])));
            }
            obj -= wx[i] * p.ln();
            for (nj, k) in next.iter_mut().zip(row) {
                *nj += wx[i] * k / p;
            }
        }
        let mass: f64 = wx.iter().sum();
        for (wj, nj) in w.iter_mut().zip(&next) {
            *wj *= nj / mass;
        }
        let total: f64 = w.iter().sum();
        for wj in &mut w {
            *wj /= total;
        }
        if prev - obj < EM_TOL {
            break;
        }
        prev = obj;
    }
    MixingDistribution::new(z_grid.to_vec(), w)
}

/// Projection of the `σ`-score onto the orthocomplement of the nuisance
/// scores `gⱼ(x) = Σᵢ aⱼ(zᵢ) wᵢ φ_σ(x − zᵢ) / p(x)`, estimated on `mc_size`
/// draws from `P₀`.
///
/// The `aⱼ` are the indicators of `basis_size` equal bins of `[0, 1]`,
/// centred under `F₀`. With `basis_size` a power of two the bases are nested.
pub fn mixture_efficient_projection(
    sigma0: f64,
    f0: &MixingDistribution,
    basis_size: usize,
    mc_size: usize,
    rng: &mut SplitRng,
) -> Result<Projection, ModelError> {
    if !(sigma0 > 0.0) {
        return Err(ModelError::InvalidInput("sigma0 must be positive".into()));
    }
    if mc_size < 2 {
        return Err(ModelError::InvalidInput("need at least two Monte Carlo draws".into()));
    }
    let xs: Vec<f64> = (0..mc_size)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            f0.sample(rng) + sigma0 * e
        })
        .collect();
    let draws = SampleSet::scalar(xs, rng.seed())?;

    let f = Arc::new(f0.clone());
    let score: ScalarFn = {
        let f = f.clone();
        Arc::new(move |x: &[f64]| mixture_sigma_score(sigma0, &f, x[0]))
    };
    let mut basis: Vec<ScalarFn> = Vec::new();
    for j in 0..basis_size {
        let bin = |z: f64| ((z * basis_size as f64) as usize).min(basis_size - 1);
        let raw: Vec<f64> = f0.atoms.iter().map(|&z| if bin(z) == j { 1.0 } else { 0.0 }).collect();
        let mean: f64 = raw.iter().zip(&f0.weights).map(|(a, w)| a * w).sum();
        let coef: Vec<f64> = raw.iter().map(|a| a - mean).collect();
        if coef.iter().all(|c| c.abs() < 1e-15) {
            continue;
        }
        let f = f.clone();
        basis.push(Arc::new(move |x: &[f64]| {
            let mut num = 0.0;
            let mut den = 0.0;
            for ((z, w), a) in f.atoms.iter().zip(&f.weights).zip(&coef) {
                let k = w * phi(sigma0, x[0] - z);
                num += a * k;
                den += k;
            }
            num / den
        }));
    }
    Ok(project_efficient_score(score, basis, &draws)?)
}

/// Efficient influence for `σ` at `(σ₀, F₀)`; see
/// [`mixture_efficient_projection`]. Fails when the projected information
/// is numerically zero.
pub fn mixture_efficient_info(
    sigma0: f64,
    f0: &MixingDistribution,
    basis_size: usize,
    mc_size: usize,
    rng: &mut SplitRng,
) -> Result<EfficientInfluence, ModelError> {
    Ok(mixture_efficient_projection(sigma0, f0, basis_size, mc_size, rng)?.into_influence()?)
}

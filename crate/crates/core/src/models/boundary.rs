//! Support-boundary model: observations `θ + X` where `X` has the Esscher
//! density `η(x) ∝ exp(−αx + ∫₀ˣ ℓ̇)` on `[0, ∞)`, with a prior on `ℓ̇` given
//! by `S·Ψ(Z + W)`, `Ψ = (2/π) arctan`, `Z` standard normal and `W` a
//! Brownian motion.
//!
//! The Brownian path lives on `[0, 1]`; it is carried to `[0, ∞)` through
//! `t = u/(1 − u)`. Paths are piecewise linear between knots on `[0, T]` and
//! constant beyond `T`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nuisance::locate;
use super::ModelError;
use crate::posterior::{ess_of, grid_posterior_from_log, Chain};
use crate::quadrature::GaussLegendre;
use crate::rng::SplitRng;
use crate::stats::{linspace, GridDensity, SampleSet};

/// Dataset CSV column, see [`SampleSet::write_csv`].
pub const BOUNDARY_COLUMNS: [&str; 1] = ["x"];

const ESS_FLOOR: f64 = 20.0;
const MAX_SUBPIECE: f64 = 0.5;
const THETA_WINDOW: f64 = 30.0;
const THETA_POINTS: usize = 401;

fn psi(x: f64) -> f64 {
    std::f64::consts::FRAC_2_PI * x.atan()
}

/// A bounded slope function `ℓ̇` on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LscriptRepr", into = "LscriptRepr")]
pub struct LscriptPath {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// `∫₀^{tⱼ} ℓ̇` at each knot.
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LscriptRepr {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<LscriptRepr> for LscriptPath {
    type Error = ModelError;

    fn try_from(r: LscriptRepr) -> Result<Self, ModelError> {
        LscriptPath::new(r.knots, r.values)
    }
}

impl From<LscriptPath> for LscriptRepr {
    fn from(p: LscriptPath) -> Self {
        LscriptRepr { knots: p.knots, values: p.values }
    }
}

impl LscriptPath {
    /// Knots must start at 0 and increase strictly; the value at the last
    /// knot `T` is kept on `[T, ∞)`.
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, ModelError> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(ModelError::InvalidConfig("slope path needs at least 2 knots with values".into()));
        }
        if knots[0] != 0.0 || knots.windows(2).any(|w| w[1] <= w[0]) || !knots[knots.len() - 1].is_finite() {
            return Err(ModelError::InvalidConfig("slope path knots must start at 0 and increase".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidConfig("slope path values must be finite".into()));
        }
        let mut cumulative = vec![0.0; knots.len()];
        for j in 1..knots.len() {
            cumulative[j] = cumulative[j - 1] + 0.5 * (values[j - 1] + values[j]) * (knots[j] - knots[j - 1]);
        }
        Ok(Self { knots, values, cumulative })
    }

    pub fn constant(c: f64, grid_t: f64) -> Self {
        Self::new(vec![0.0, grid_t], vec![c, c]).expect("constant path is valid")
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid_t(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// `ℓ̇(∞)`.
    pub fn tail(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (i, w) = locate(&self.knots, t);
        if w == 0.0 {
            self.values[i]
        } else {
            (1.0 - w) * self.values[i] + w * self.values[i + 1]
        }
    }

    /// `∫₀ᵗ ℓ̇` for `t ≥ 0`.
    pub fn integral(&self, t: f64) -> f64 {
        let last = self.knots.len() - 1;
        if t >= self.knots[last] {
            return self.cumulative[last] + self.values[last] * (t - self.knots[last]);
        }
        let j = self.knots.partition_point(|&k| k <= t).max(1) - 1;
        let ds = t - self.knots[j];
        let slope = (self.values[j + 1] - self.values[j]) / (self.knots[j + 1] - self.knots[j]);
        self.cumulative[j] + self.values[j] * ds + 0.5 * slope * ds * ds
    }

    /// Coefficients `(I_j, ℓ_j, d_j)` of `∫₀ˢ ℓ̇ = I_j + ℓ_j(s − t_j) + ½d_j(s − t_j)²`
    /// on piece `j`; the last piece is the constant tail.
    fn piece(&self, j: usize) -> (f64, f64, f64) {
        let slope = if j + 1 < self.knots.len() {
            (self.values[j + 1] - self.values[j]) / (self.knots[j + 1] - self.knots[j])
        } else {
            0.0
        };
        (self.cumulative[j], self.values[j], slope)
    }
}

/// Knot grid `t_j = u_j/(1 − u_j)` with `u_j` equispaced on `[0, T/(T + 1)]`.
pub fn boundary_knots(m: usize, grid_t: f64) -> (Vec<f64>, Vec<f64>) {
    let u_max = grid_t / (grid_t + 1.0);
    let u: Vec<f64> = linspace(0.0, u_max, m.max(2));
    let mut t: Vec<f64> = u.iter().map(|&v| v / (1.0 - v)).collect();
    t[0] = 0.0;
    let last = t.len() - 1;
    t[last] = grid_t;
    (u, t)
}

/// Normalized Esscher density of one slope path.
#[derive(Debug, Clone)]
pub struct Esscher {
    path: LscriptPath,
    alpha: f64,
    log_z: f64,
    /// Subintervals of `[0, T]` with the mass to their left.
    cells: Vec<(f64, f64, f64)>,
    mass_below_t: f64,
    gl: GaussLegendre,
}

impl Esscher {
    pub fn new(path: LscriptPath, alpha: f64) -> Result<Self, ModelError> {
        if !(alpha > path.sup_norm()) {
            return Err(ModelError::InvalidConfig(format!(
                "alpha = {alpha} must exceed sup |ℓ̇| = {}",
                path.sup_norm()
            )));
        }
        let gl = GaussLegendre::new(8);
        let unnorm = |x: f64| (-alpha * x + path.integral(x)).exp();
        let mut cells = Vec::new();
        let mut acc = 0.0;
        for w in path.knots.windows(2) {
            let pieces = ((w[1] - w[0]) / MAX_SUBPIECE).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / pieces as f64;
            for p in 0..pieces {
                let a = w[0] + p as f64 * h;
                let b = if p + 1 == pieces { w[1] } else { a + h };
                cells.push((a, b, acc));
                acc += gl.integrate(a, b, unnorm);
            }
        }
        let t = path.grid_t();
        let tail_mass = unnorm(t) / (alpha - path.tail());
        let z = acc + tail_mass;
        for c in &mut cells {
            c.2 /= z;
        }
        Ok(Self { log_z: z.ln(), mass_below_t: acc / z, path, alpha, cells, gl })
    }

    pub fn path(&self) -> &LscriptPath {
        &self.path
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_z
    }

    /// `log η(x)`, `-inf` for `x < 0`.
    pub fn ln_density(&self, x: f64) -> f64 {
        if x < 0.0 {
            f64::NEG_INFINITY
        } else {
            -self.alpha * x + self.path.integral(x) - self.log_z
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }

    /// `η(0)`, the rate of the limiting exponential law.
    pub fn gamma(&self) -> f64 {
        (-self.log_z).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let t = self.path.grid_t();
        if x >= t {
            let rate = self.alpha - self.path.tail();
            return 1.0 - (1.0 - self.mass_below_t) * (-rate * (x - t)).exp();
        }
        let i = self.cells.partition_point(|c| c.0 <= x).max(1) - 1;
        let (a, _, below) = self.cells[i];
        below + self.gl.integrate(a, x, |s| self.density(s))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        if p >= self.mass_below_t {
            let t = self.path.grid_t();
            let rate = self.alpha - self.path.tail();
            let rest = (1.0 - p) / (1.0 - self.mass_below_t);
            return if rest <= 0.0 { f64::INFINITY } else { t - rest.ln() / rate };
        }
        let i = self.cells.partition_point(|c| c.2 <= p).max(1) - 1;
        let (a, b, below) = self.cells[i];
        // Newton from the left end, safeguarded by bisection
        let (mut lo, mut hi) = (a, b);
        let mut x = a + 0.5 * (b - a);
        for _ in 0..60 {
            let f = below + self.gl.integrate(a, x, |s| self.density(s)) - p;
            if f.abs() < 1e-14 {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = x - f / self.density(x);
            x = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }
}

/// `η(x)` for the slope path `lscript`.
pub fn esscher_density(lscript: &LscriptPath, alpha: f64, x: f64) -> Result<f64, ModelError> {
    if x < 0.0 {
        return Err(ModelError::InvalidInput(format!("Esscher density is supported on x >= 0, got {x}")));
    }
    Ok(Esscher::new(lscript.clone(), alpha)?.density(x))
}

/// Gaussian coordinates behind a prior path: `Z` and standardized Brownian
/// increments on the `u` grid, plus one final increment up to `u = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLatent {
    pub z: f64,
    pub increments: Vec<f64>,
}

impl BoundaryLatent {
    pub fn draw(m: usize, rng: &mut SplitRng) -> Self {
        Self {
            z: rng.sample(StandardNormal),
            increments: (0..m).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    pub fn zero(m: usize) -> Self {
        Self { z: 0.0, increments: vec![0.0; m] }
    }

    pub fn dim(&self) -> usize {
        1 + self.increments.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        if i == 0 {
            self.z
        } else {
            self.increments[i - 1]
        }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        if i == 0 {
            self.z = v;
        } else {
            self.increments[i - 1] = v;
        }
    }

    /// `Z + W_u` at the knots `u`, and `Z + W_1`.
    pub fn process(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let mut out = Vec::with_capacity(u.len());
        let mut w = 0.0;
        out.push(self.z);
        for j in 1..u.len() {
            w += (u[j] - u[j - 1]).sqrt() * self.increments[j - 1];
            out.push(self.z + w);
        }
        let last = u[u.len() - 1];
        let final_inc = self.increments.get(u.len() - 1).copied().unwrap_or(0.0);
        (out, self.z + w + (1.0 - last).sqrt() * final_inc)
    }

    pub fn to_path(&self, u: &[f64], t: &[f64], bound: f64) -> Result<LscriptPath, ModelError> {
        let (x, _) = self.process(u);
        LscriptPath::new(t.to_vec(), x.iter().map(|&v| bound * psi(v)).collect())
    }
}

/// One prior draw `S·Ψ(Z + W)` on `m` knots over `[0, grid_t]`.
pub fn boundary_sample_prior(bound: f64, m: usize, grid_t: f64, rng: &mut SplitRng) -> Result<LscriptPath, ModelError> {
    let (u, t) = boundary_knots(m, grid_t);
    BoundaryLatent::draw(u.len(), rng).to_path(&u, &t, bound)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopePrior {
    /// `S·Ψ(Z + W)`.
    Arctan,
    /// Point mass at the true slope path.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundaryConfig {
    pub theta0: f64,
    pub lscript0: LscriptPath,
    pub alpha: f64,
    /// Radius `S` of the slope ball.
    pub s: f64,
    pub theta_prior: GridDensity,
    pub grid_t: f64,
    /// Scale of the prior paths, at most `s`.
    pub prior_s: f64,
    pub knots: usize,
    /// Autoregressive coefficient of the path proposal.
    pub blend: f64,
    pub slope_prior: SlopePrior,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        let (alpha, s) = (2.0, 1.0);
        let grid_t = 23.0 / (alpha - s);
        let knots = 40;
        let (u, t) = boundary_knots(knots, grid_t);
        let lscript0 = LscriptPath::new(t, u.iter().map(|&v| 0.5 * (1.0 - 2.0 * v)).collect()).expect("valid");
        let grid = linspace(-12.0, 12.0, 4801);
        let theta_prior =
            GridDensity::tabulate(grid, |x| crate::stats::special::normal_pdf(x, 0.0, 2.0)).expect("valid");
        Self {
            theta0: 0.0,
            lscript0,
            alpha,
            s,
            theta_prior,
            grid_t,
            prior_s: s,
            knots,
            blend: 0.9,
            slope_prior: SlopePrior::Arctan,
        }
    }
}

impl BoundaryConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.s > 0.0 && self.s < self.alpha) {
            return Err(ModelError::InvalidConfig(format!("need 0 < S < alpha, got S = {}, alpha = {}", self.s, self.alpha)));
        }
        if !(self.prior_s > 0.0 && self.prior_s <= self.s) {
            return Err(ModelError::InvalidConfig("prior_s must lie in (0, S]".into()));
        }
        if self.lscript0.sup_norm() > self.s {
            return Err(ModelError::InvalidConfig("true slope path leaves the S-ball".into()));
        }
        if (self.lscript0.grid_t() - self.grid_t).abs() > 1e-9 * self.grid_t {
            return Err(ModelError::InvalidConfig("true slope path must end at grid_t".into()));
        }
        if self.grid_t * (self.alpha - self.s) < 23.0 - 1e-9 {
            return Err(ModelError::InvalidConfig(format!(
                "grid_t = {} leaves too much tail mass; use at least {}",
                self.grid_t,
                23.0 / (self.alpha - self.s)
            )));
        }
        if self.knots < 2 {
            return Err(ModelError::InvalidConfig("need at least 2 knots".into()));
        }
        if !(0.0..1.0).contains(&self.blend) {
            return Err(ModelError::InvalidConfig("blend must lie in [0, 1)".into()));
        }
        if !self.theta0.is_finite() {
            return Err(ModelError::InvalidConfig("theta0 must be finite".into()));
        }
        Ok(())
    }

    pub fn truth(&self) -> Result<Esscher, ModelError> {
        Esscher::new(self.lscript0.clone(), self.alpha)
    }

    /// `γ = η₀(0)`.
    pub fn gamma(&self) -> Result<f64, ModelError> {
        Ok(self.truth()?.gamma())
    }
}

/// `θ₀ + X` with `X` drawn from the true Esscher density by inversion.
pub fn boundary_generate(config: &BoundaryConfig, n: usize, rng: &mut SplitRng) -> Result<SampleSet, ModelError> {
    config.validate()?;
    if n == 0 {
        return Err(ModelError::InvalidInput("sample size must be at least 1".into()));
    }
    let truth = config.truth()?;
    let xs = (0..n).map(|_| config.theta0 + truth.quantile(rng.random::<f64>())).collect();
    Ok(SampleSet::scalar(xs, rng.seed())?)
}

/// Posterior `∝ prior(θ)·e^{rate·nθ}·1{θ ≤ X₍₁₎}` of the exponential location
/// family, on a grid over `[X₍₁₎ − 40/(rate·n), X₍₁₎]` cut to the prior support.
pub fn exp_location_exact_posterior_with_rate(
    sample: &SampleSet,
    prior: &GridDensity,
    rate: f64,
) -> Result<GridDensity, ModelError> {
    if sample.is_empty() {
        return Err(ModelError::InvalidInput("empty sample".into()));
    }
    let n = sample.len() as f64;
    let x1 = sample.min_scalar();
    let lo = (x1 - 40.0 / (rate * n)).max(prior.lower());
    let hi = x1.min(prior.upper());
    if !(hi > lo) {
        return Err(ModelError::InvalidInput("prior puts no mass below the smallest observation".into()));
    }
    let grid = linspace(lo, hi, 4001);
    let logs: Vec<f64> = grid.iter().map(|&t| prior.eval(t).ln() + rate * n * (t - x1)).collect();
    grid_posterior_from_log(grid, logs).map_err(|e| match e {
        crate::posterior::PosteriorError::ZeroPosteriorMass => {
            ModelError::InvalidInput("prior puts no mass below the smallest observation".into())
        }
        other => other.into(),
    })
}

/// Exact posterior of `θ` in the model `X = θ + Exp(1)`.
pub fn exp_location_exact_posterior(sample: &SampleSet, prior: &GridDensity) -> Result<GridDensity, ModelError> {
    exp_location_exact_posterior_with_rate(sample, prior, 1.0)
}

/// Sorted observations with prefix sums, for evaluating
/// `Σᵢ ∫₀^{xᵢ−θ} ℓ̇` in `O(m log n)`.
#[derive(Debug, Clone)]
struct SortedSample {
    /// `xᵢ − X₍₁₎`, ascending.
    x: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    x1: f64,
}

impl SortedSample {
    fn new(sample: &SampleSet) -> Self {
        let x1 = sample.min_scalar();
        let mut x: Vec<f64> = sample.as_flat().iter().map(|v| v - x1).collect();
        x.sort_by(f64::total_cmp);
        let mut s1 = Vec::with_capacity(x.len() + 1);
        let mut s2 = Vec::with_capacity(x.len() + 1);
        s1.push(0.0);
        s2.push(0.0);
        for &v in &x {
            s1.push(s1[s1.len() - 1] + v);
            s2.push(s2[s2.len() - 1] + v * v);
        }
        Self { x, s1, s2, x1 }
    }

    fn n(&self) -> usize {
        self.x.len()
    }

    /// `Σᵢ ∫₀^{xᵢ−θ} ℓ̇` where `d = X₍₁₎ − θ ≥ 0`.
    fn integrated_slope(&self, path: &LscriptPath, d: f64) -> f64 {
        let m = path.knots.len();
        let mut total = 0.0;
        // observations with xᵢ − θ in [t_j, t_{j+1}), i.e. shifted x in [t_j − d, t_{j+1} − d)
        let mut start = 0usize;
        for j in 0..m {
            let end = if j + 1 < m {
                let edge = path.knots[j + 1] - d;
                start + self.x[start..].partition_point(|&v| v < edge)
            } else {
                self.n()
            };
            let cnt = (end - start) as f64;
            if cnt > 0.0 {
                let (ij, lj, dj) = path.piece(j);
                let c = path.knots[j] - d; // s − t_j = x − c
                let sx = self.s1[end] - self.s1[start];
                let sxx = self.s2[end] - self.s2[start];
                let lin = sx - cnt * c;
                let quad = sxx - 2.0 * c * sx + cnt * c * c;
                total += cnt * ij + lj * lin + 0.5 * dj * quad;
            }
            start = end;
        }
        total
    }

    /// `Σᵢ log η(xᵢ − θ)` without the normalizer, for `θ ≤ X₍₁₎`.
    fn log_kernel(&self, path: &LscriptPath, alpha: f64, d: f64) -> f64 {
        let sum_s = self.s1[self.n()] + self.n() as f64 * d;
        -alpha * sum_s + self.integrated_slope(path, d)
    }
}

/// `log Πᵢ η₀(xᵢ − θ₀ − h/n)/η₀(xᵢ − θ₀)` in the model with `ℓ̇` fixed at the truth.
pub fn boundary_log_ratio(sample: &SampleSet, truth: &Esscher, theta0: f64, h: f64) -> f64 {
    let n = sample.len() as f64;
    let theta = theta0 + h / n;
    sample
        .as_flat()
        .iter()
        .map(|&x| truth.ln_density(x - theta) - truth.ln_density(x - theta0))
        .sum()
}

/// Marginal posterior of `h = n(θ − θ₀)` in the boundary model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoundaryPosteriorRepr", into = "BoundaryPosteriorRepr")]
pub struct BoundaryPosterior {
    pub h_density: GridDensity,
    pub delta_n: f64,
    pub gamma: f64,
    pub ess: Option<f64>,
    pub accept_rate: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoundaryPosteriorRepr {
    delta_n: f64,
    gamma: f64,
    h_grid: Vec<f64>,
    h_density: Vec<f64>,
}

impl TryFrom<BoundaryPosteriorRepr> for BoundaryPosterior {
    type Error = ModelError;

    fn try_from(r: BoundaryPosteriorRepr) -> Result<Self, ModelError> {
        Ok(BoundaryPosterior {
            h_density: GridDensity::new(r.h_grid, r.h_density)?,
            delta_n: r.delta_n,
            gamma: r.gamma,
            ess: None,
            accept_rate: None,
        })
    }
}

impl From<BoundaryPosterior> for BoundaryPosteriorRepr {
    fn from(p: BoundaryPosterior) -> Self {
        BoundaryPosteriorRepr {
            delta_n: p.delta_n,
            gamma: p.gamma,
            h_grid: p.h_density.grid().to_vec(),
            h_density: p.h_density.values().to_vec(),
        }
    }
}

/// Metropolis-within-Gibbs over `(θ, ℓ̇)`.
///
/// `θ | ℓ̇` is drawn from its exact conditional on a grid over
/// `[X₍₁₎ − 30/(n(α − S)), X₍₁₎]`. The path is updated one Gaussian latent
/// coordinate at a time by the prior-preserving step
/// `x' = ρx + √(1 − ρ²)ε`, accepted on the likelihood ratio. The `h` density
/// averages the exact `θ` conditionals over the post-burn-in sweeps.
pub fn boundary_posterior(
    sample: &SampleSet,
    config: &BoundaryConfig,
    iters: usize,
    rng: &mut SplitRng,
) -> Result<BoundaryPosterior, ModelError> {
    config.validate()?;
    if sample.is_empty() || sample.dim() != 1 {
        return Err(ModelError::InvalidInput("boundary samples are nonempty and scalar".into()));
    }
    let burn_in = (iters / 5).min(10_000);
    if iters <= burn_in + 1 {
        return Err(ModelError::InvalidInput(format!("{iters} iterations leave nothing after burn-in")));
    }
    let data = SortedSample::new(sample);
    let n = data.n() as f64;
    let alpha = config.alpha;
    let width = THETA_WINDOW / (n * (alpha - config.s));
    // d = X₍₁₎ − θ on an ascending grid, so θ descends; store θ ascending instead
    let theta_grid = linspace(data.x1 - width, data.x1, THETA_POINTS);
    let log_prior: Vec<f64> = theta_grid.iter().map(|&t| config.theta_prior.eval(t).ln()).collect();
    if log_prior.iter().all(|&l| l == f64::NEG_INFINITY) {
        return Err(ModelError::InvalidConfig("theta prior vanishes below the smallest observation".into()));
    }
    let (u, t) = boundary_knots(config.knots, config.grid_t);
    let degenerate = config.slope_prior == SlopePrior::Degenerate;
    let mut latent = BoundaryLatent::zero(u.len());
    let mut path = if degenerate { config.lscript0.clone() } else { latent.to_path(&u, &t, config.prior_s)? };
    let mut log_z = Esscher::new(path.clone(), alpha)?.log_normalizer();
    let rho = config.blend;
    let innov = (1.0 - rho * rho).sqrt();

    let mut chain = Chain::new(1);
    let mut rb = vec![0.0; THETA_POINTS];
    let mut rb_count = 0usize;
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let mut theta = data.x1;

    for it in 0..iters {
        // θ | ℓ̇
        let logs: Vec<f64> = theta_grid
            .iter()
            .zip(&log_prior)
            .map(|(&th, &lp)| lp + data.log_kernel(&path, alpha, data.x1 - th))
            .collect();
        let cond = grid_posterior_from_log(theta_grid.clone(), logs)?;
        theta = cond.sample(rng);
        // ℓ̇ | θ
        if !degenerate {
            let d = data.x1 - theta;
            let mut current = data.log_kernel(&path, alpha, d) - n * log_z;
            for i in 0..latent.dim() {
                let old = latent.get(i);
                let eps: f64 = rng.sample(StandardNormal);
                latent.set(i, rho * old + innov * eps);
                let cand = latent.to_path(&u, &t, config.prior_s)?;
                let cand_log_z = Esscher::new(cand.clone(), alpha)?.log_normalizer();
                let ll = data.log_kernel(&cand, alpha, d) - n * cand_log_z;
                proposed += 1;
                if rng.random::<f64>().ln() < ll - current {
                    path = cand;
                    log_z = cand_log_z;
                    current = ll;
                    accepted += 1;
                } else {
                    latent.set(i, old);
                }
            }
        }
        if it >= burn_in {
            chain.push(&[n * (theta - config.theta0)], 0.0, true);
            for (a, v) in rb.iter_mut().zip(cond.values()) {
                *a += v;
            }
            rb_count += 1;
        }
    }
    let _ = theta;
    let draws = chain.coordinate(0);
    let ess = ess_of(&draws)?;
    if ess < ESS_FLOOR {
        return Err(ModelError::Diagnostics(format!("ESS of theta is {ess:.1}, below {ESS_FLOOR}")));
    }
    for v in &mut rb {
        *v /= rb_count as f64;
    }
    let theta_density = GridDensity::new(theta_grid, rb)?;
    let h_density = theta_density.affine(-n * config.theta0, n)?;
    Ok(BoundaryPosterior {
        h_density,
        delta_n: n * (data.x1 - config.theta0),
        gamma: config.gamma()?,
        ess: Some(ess),
        accept_rate: (proposed > 0).then(|| accepted as f64 / proposed as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;
    use crate::stats::{kolmogorov_distance, tv_distance, tv_to_law, Law, NegExpLaw};

    fn generic_path() -> LscriptPath {
        let (u, t) = boundary_knots(30, 23.0);
        LscriptPath::new(t, u.iter().map(|&v| 0.8 * (7.0 * v).sin()).collect()).unwrap()
    }

    #[test]
    fn zero_slope_is_exponential() {
        let p = LscriptPath::constant(0.0, 23.0);
        assert!((esscher_density(&p, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((esscher_density(&p, 2.0, 0.7).unwrap() - 2.0 * (-1.4f64).exp()).abs() < 1e-12);
        assert!(esscher_density(&p, 1.0, -0.1).is_err());
    }

    #[test]
    fn constant_slope_shifts_the_rate() {
        let c = -0.6;
        let p = LscriptPath::constant(c, 23.0);
        for &x in &[0.0, 0.5, 3.0, 30.0] {
            let expected = (2.0 - c) * (-(2.0 - c) * x).exp();
            assert!((esscher_density(&p, 2.0, x).unwrap() - expected).abs() < 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn generic_path_is_normalized() {
        let e = Esscher::new(generic_path(), 2.0).unwrap();
        // independent check: adaptive Simpson on [0, 23] plus the tail
        let inner = adaptive_simpson(&|x| e.density(x), 0.0, 23.0, 1e-13);
        let tail = e.density(23.0) / (2.0 - e.path().tail());
        assert!((inner + tail - 1.0).abs() < 1e-8);
        assert!((e.cdf(5.0) - adaptive_simpson(&|x| e.density(x), 0.0, 5.0, 1e-13)).abs() < 1e-10);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let e = Esscher::new(generic_path(), 2.0).unwrap();
        for &p in &[1e-6, 0.1, 0.5, 0.9, 0.999, 1.0 - 1e-11] {
            let x = e.quantile(p);
            assert!((e.cdf(x) - p).abs() < 1e-10, "p={p}");
        }
    }

    #[test]
    fn log_lipschitz_on_knots() {
        let e = Esscher::new(generic_path(), 2.0).unwrap();
        let k = e.path().knots().to_vec();
        for w in k.windows(2) {
            let d = (e.ln_density(w[1]) - e.ln_density(w[0])).abs();
            assert!(d <= 3.0 * (w[1] - w[0]) + 1e-12);
        }
    }

    #[test]
    fn integrated_slope_matches_direct_sum() {
        let path = generic_path();
        let s = SampleSet::scalar(vec![0.3, 0.31, 2.0, 7.5, 40.0, 0.9], 0).unwrap();
        let data = SortedSample::new(&s);
        for &d in &[0.0, 0.05, 1.7] {
            let fast = data.integrated_slope(&path, d);
            let direct: f64 = s.as_flat().iter().map(|&x| path.integral(x - data.x1 + d)).sum();
            assert!((fast - direct).abs() < 1e-10, "{fast} vs {direct}");
        }
    }

    #[test]
    fn prior_paths_stay_in_the_ball() {
        let mut rng = SplitRng::new(1);
        let (u, _) = boundary_knots(40, 23.0);
        let mut w1 = Vec::new();
        for _ in 0..10_000 {
            let lat = BoundaryLatent::draw(u.len(), &mut rng);
            w1.push(lat.process(&u).1);
        }
        let var = crate::stats::summary::variance(&w1);
        assert!((var - 2.0).abs() / 2.0 < 0.05, "{var}");
        for _ in 0..100 {
            let p = boundary_sample_prior(0.7, 40, 23.0, &mut rng).unwrap();
            assert!(p.sup_norm() <= 0.7);
        }
        let a = boundary_sample_prior(1.0, 40, 23.0, &mut SplitRng::new(5)).unwrap();
        let b = boundary_sample_prior(1.0, 40, 23.0, &mut SplitRng::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_data_respect_the_support() {
        let config = BoundaryConfig { theta0: 1.5, ..BoundaryConfig::default() };
        let s = boundary_generate(&config, 1000, &mut SplitRng::new(2)).unwrap();
        assert!(s.as_flat().iter().all(|&x| x >= 1.5));
    }

    #[test]
    fn zero_slope_data_are_exponential() {
        let config = BoundaryConfig {
            lscript0: LscriptPath::constant(0.0, 23.0),
            ..BoundaryConfig::default()
        };
        let n = 10_000;
        let s = boundary_generate(&config, n, &mut SplitRng::new(3)).unwrap();
        let ks = kolmogorov_distance(s.as_flat(), |x| 1.0 - (-2.0 * x).exp());
        assert!(ks < 1.63 / (n as f64).sqrt());
    }

    #[test]
    fn minimum_has_exponential_limit() {
        let config = BoundaryConfig::default();
        let gamma = config.gamma().unwrap();
        let root = SplitRng::new(4);
        let mins: Vec<f64> = (0..500)
            .map(|r| {
                let s = boundary_generate(&config, 1000, &mut root.split(r)).unwrap();
                1000.0 * s.min_scalar()
            })
            .collect();
        let ks = kolmogorov_distance(&mins, |x| 1.0 - (-gamma * x).exp());
        assert!(ks < 0.1, "ks {ks}");
    }

    #[test]
    fn flat_prior_exact_posterior_is_truncated_exponential() {
        let s = SampleSet::scalar(vec![0.4, 0.9, 0.52, 3.0, 0.41, 1.1, 0.7, 2.2, 0.6, 0.45], 0).unwrap();
        let n = 10.0;
        let x1 = 0.4;
        let a = 2.5; // na = 25
        let prior = GridDensity::new(vec![x1 - a, x1 + 1.0], vec![1.0, 1.0]).unwrap();
        let post = exp_location_exact_posterior(&s, &prior).unwrap();
        assert!(post.upper() <= x1);
        // pointwise against the normalized truncated exponential
        let lo = post.lower();
        let norm = (1.0 - (-n * (x1 - lo)).exp()) / n;
        let mut worst: f64 = 0.0;
        for (&t, &v) in post.grid().iter().zip(post.values()) {
            let exact = (n * (t - x1)).exp() / norm;
            worst = worst.max((v - exact).abs() / exact);
        }
        assert!(worst < 1e-4, "{worst}");
        // closed-form TV of the truncation is e^{-na}/(1 - e^{-na}) at most
        let q = (-n * a).exp();
        assert!(q / (1.0 - q) < 1e-8);
        let law = Law::from(NegExpLaw::new(x1, n).unwrap());
        assert!(tv_to_law(&post, &law).unwrap() < 1e-4);
    }

    #[test]
    fn single_point_exact_posterior() {
        let s = SampleSet::scalar(vec![0.0], 0).unwrap();
        let prior = GridDensity::new(vec![-5.0, 5.0], vec![1.0, 1.0]).unwrap();
        let post = exp_location_exact_posterior(&s, &prior).unwrap();
        // e^θ on [-5, 0] normalized by 1 − e^{-5}
        let expected = (-1.0f64).exp() / (1.0 - (-5.0f64).exp());
        assert!((post.eval(-1.0) - expected).abs() < 1e-6);
    }

    #[test]
    fn degenerate_slope_matches_exact_posterior() {
        let config = BoundaryConfig {
            lscript0: LscriptPath::constant(0.0, 23.0),
            slope_prior: SlopePrior::Degenerate,
            ..BoundaryConfig::default()
        };
        let n = 300;
        let s = boundary_generate(&config, n, &mut SplitRng::new(6)).unwrap();
        let post = boundary_posterior(&s, &config, 2_000, &mut SplitRng::new(7)).unwrap();
        let exact = exp_location_exact_posterior_with_rate(&s, &config.theta_prior, config.alpha).unwrap();
        let exact_h = exact.affine(-(n as f64) * config.theta0, n as f64).unwrap();
        let tv = tv_distance(&post.h_density, &exact_h);
        assert!(tv < 0.05, "tv {tv}");
        assert!(post.h_density.upper() <= post.delta_n + 1e-9);
    }

    #[test]
    fn posterior_json_shape() {
        let config = BoundaryConfig { slope_prior: SlopePrior::Degenerate, ..BoundaryConfig::default() };
        let s = boundary_generate(&config, 50, &mut SplitRng::new(8)).unwrap();
        let post = boundary_posterior(&s, &config, 200, &mut SplitRng::new(9)).unwrap();
        let v = serde_json::to_value(&post).unwrap();
        for key in ["delta_n", "gamma", "h_grid", "h_density"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: BoundaryPosterior = serde_json::from_value(v).unwrap();
        assert_eq!(back.delta_n, post.delta_n);
    }

    #[test]
    fn full_posterior_is_near_the_exponential_limit() {
        let config = BoundaryConfig::default();
        let s = boundary_generate(&config, 1000, &mut SplitRng::new(10)).unwrap();
        let post = boundary_posterior(&s, &config, 600, &mut SplitRng::new(11)).unwrap();
        let law = Law::from(NegExpLaw::new(post.delta_n, post.gamma).unwrap());
        let tv = tv_to_law(&post.h_density, &law).unwrap();
        assert!(tv < 0.15, "tv {tv}");
        let acc = post.accept_rate.unwrap();
        assert!(acc > 0.05 && acc < 0.99, "acceptance {acc}");
    }
}

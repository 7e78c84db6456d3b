//! Partial linear regression `Y = θU + η(V) + e` with an integrated Brownian
//! motion prior on `η`.
//!
//! `η` is represented by its values on `m` equispaced knots. Writing those
//! values as `Lξ` with `LLᵀ` the prior covariance and `ξ` standard normal,
//! the data given `θ` satisfy `Y − θU = BLξ + e` for the interpolation matrix
//! `B`. Everything Gaussian is then handled through the `m × m` matrix
//! `A = I + LᵀBᵀBL` (Woodbury), so no `n × n` matrix is ever formed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nuisance::{holder_seminorm, locate};
use super::{ModelError, NuisancePath};
use crate::lan::EfficientInfluence;
use crate::posterior::{ess_of, grid_posterior_from_log, Chain};
use crate::quadrature::{adaptive_simpson, GaussLegendre};
use crate::rng::SplitRng;
use crate::stats::special::{normal_ln_pdf, normal_pdf};
use crate::stats::{GridDensity, SampleSet};

/// Dataset CSV columns, see [`SampleSet::write_csv`].
pub const PLR_COLUMNS: [&str; 3] = ["y", "u", "v"];

const PRIOR_JITTER: f64 = 1e-10;
const MAX_REJECTIONS: usize = 100_000;
const ESS_FLOOR: f64 = 20.0;

/// Prior on the parameter of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaPrior {
    Gaussian { mean: f64, sd: f64 },
    Grid { density: GridDensity },
}

impl ThetaPrior {
    pub fn ln_density(&self, theta: f64) -> f64 {
        match self {
            ThetaPrior::Gaussian { mean, sd } => normal_ln_pdf(theta, *mean, *sd),
            ThetaPrior::Grid { density } => density.eval(theta).ln(),
        }
    }
}

/// Which nuisance prior the posterior is computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuisancePrior {
    /// Integrated Brownian motion.
    Ibm,
    /// Integrated Brownian motion restricted to `‖η‖_∞ + |η|_α < M`.
    Conditioned,
    /// Point mass at the true `η₀`.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlrConfig {
    pub theta0: f64,
    pub eta0: NuisancePath,
    /// `v ↦ E[U | V = v]` before standardization.
    pub condexp: NuisancePath,
    pub xi_sd: f64,
    pub prior_k: u32,
    pub holder_alpha: f64,
    pub holder_bound: f64,
    pub theta_prior: ThetaPrior,
    pub knots: usize,
    pub nuisance_prior: NuisancePrior,
}

impl Default for PlrConfig {
    fn default() -> Self {
        let m = 32;
        Self {
            theta0: 1.0,
            eta0: NuisancePath::from_fn(m, |v| 0.5 * (std::f64::consts::PI * v).sin()).expect("finite"),
            condexp: NuisancePath::from_fn(m, |v| 2.0 * v).expect("finite"),
            xi_sd: 1.0,
            prior_k: 1,
            holder_alpha: 1.0,
            holder_bound: 8.0,
            theta_prior: ThetaPrior::Gaussian { mean: 0.0, sd: 10.0 },
            knots: m,
            nuisance_prior: NuisancePrior::Ibm,
        }
    }
}

impl PlrConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.xi_sd > 0.0) || !self.xi_sd.is_finite() {
            return Err(ModelError::InvalidConfig(
                "xi_sd must be positive: U needs variation beyond E[U|V]".into(),
            ));
        }
        if self.knots < 2 {
            return Err(ModelError::InvalidConfig("need at least 2 knots".into()));
        }
        if !(self.holder_alpha > 0.5) {
            return Err(ModelError::InvalidConfig("holder_alpha must exceed 1/2".into()));
        }
        if !(self.holder_bound > 0.0) {
            return Err(ModelError::InvalidConfig("holder_bound must be positive".into()));
        }
        if !self.theta0.is_finite() {
            return Err(ModelError::InvalidConfig("theta0 must be finite".into()));
        }
        if let ThetaPrior::Gaussian { sd, mean } = self.theta_prior {
            if !(sd > 0.0) || !mean.is_finite() {
                return Err(ModelError::InvalidConfig("theta prior needs finite mean and positive sd".into()));
            }
        }
        Ok(())
    }

    /// `(E ρ(V), s)` with `s² = Var ρ(V) + xi_sd²`; `U = (ρ(V) − Eρ + ξ)/s`.
    fn standardization(&self) -> (f64, f64) {
        let (m1, m2) = self.condexp.moments();
        let var = (m2 - m1 * m1).max(0.0);
        (m1, (var + self.xi_sd * self.xi_sd).sqrt())
    }

    /// `E[U | V = ·]` after standardization.
    pub fn centered_condexp(&self) -> NuisancePath {
        let (mean, scale) = self.standardization();
        self.condexp.map(|_, r| (r - mean) / scale)
    }

    /// `Ĩ = P(U − E[U|V])²`.
    pub fn efficient_info(&self) -> f64 {
        let (_, scale) = self.standardization();
        (self.xi_sd / scale).powi(2)
    }

    pub fn prior_knots(&self) -> Vec<f64> {
        NuisancePath::equispaced_knots(self.knots)
    }
}

/// Draws `(y, u, v)` triples from the model at `(θ₀, η₀)`.
pub fn plr_generate(config: &PlrConfig, n: usize, rng: &mut SplitRng) -> Result<SampleSet, ModelError> {
    config.validate()?;
    if n == 0 {
        return Err(ModelError::InvalidInput("sample size must be at least 1".into()));
    }
    let (mean, scale) = config.standardization();
    let mut data = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let v: f64 = rng.random();
        let xi: f64 = rng.sample::<f64, _>(StandardNormal) * config.xi_sd;
        let e: f64 = rng.sample(StandardNormal);
        let u = (config.condexp.eval(v) - mean + xi) / scale;
        let y = config.theta0 * u + config.eta0.eval(v) + e;
        data.extend([y, u, v]);
    }
    Ok(SampleSet::new(3, data, rng.seed())?)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Covariance of the `k`-fold integrated Brownian motion prior at `knots`.
pub fn ibm_prior_cov(k: u32, knots: &[f64]) -> DMatrix<f64> {
    let kf2 = factorial(k).powi(2);
    let m = knots.len();
    let mut cov = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let (s, t) = (knots[i], knots[j]);
            let poly: f64 = (0..=k).map(|p| (s * t).powi(p as i32) / factorial(p).powi(2)).sum();
            let upper = s.min(t);
            let f = |u: f64| ((s - u).max(0.0) * (t - u).max(0.0)).powi(k as i32) / kf2;
            let integral = adaptive_simpson(&f, 0.0, upper, 1e-12);
            cov[(i, j)] = poly + integral;
            cov[(j, i)] = poly + integral;
        }
    }
    cov
}

/// The integrated Brownian motion prior on a fixed knot grid.
#[derive(Debug, Clone)]
pub struct IbmPrior {
    knots: Vec<f64>,
    chol: DMatrix<f64>,
    conditioning: Option<(f64, f64)>,
}

impl IbmPrior {
    pub fn new(k: u32, knots: &[f64], conditioning: Option<(f64, f64)>) -> Result<Self, ModelError> {
        if let Some((alpha, bound)) = conditioning {
            if !(bound > 0.0) || !(alpha > 0.0) {
                return Err(ModelError::InvalidConfig("conditioning needs α > 0 and M > 0".into()));
            }
        }
        let mut cov = ibm_prior_cov(k, knots);
        for i in 0..knots.len() {
            cov[(i, i)] += PRIOR_JITTER;
        }
        let chol = Cholesky::new(cov)
            .ok_or_else(|| ModelError::IllConditioned("prior covariance".into()))?
            .unpack();
        Ok(Self { knots: knots.to_vec(), chol, conditioning })
    }

    pub fn from_config(config: &PlrConfig) -> Result<Self, ModelError> {
        let cond = (config.nuisance_prior == NuisancePrior::Conditioned)
            .then_some((config.holder_alpha, config.holder_bound));
        Self::new(config.prior_k, &config.prior_knots(), cond)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Lower Cholesky factor `L` of the (jittered) prior covariance.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Whether knot values satisfy the conditioning constraint, if any.
    pub fn admits(&self, values: &[f64]) -> bool {
        match self.conditioning {
            None => true,
            Some((alpha, bound)) => {
                let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                sup + holder_seminorm(&self.knots, values, alpha) < bound
            }
        }
    }

    /// Knot values `Lz` for a standard normal `z`.
    pub fn transform(&self, z: &DVector<f64>) -> Vec<f64> {
        (&self.chol * z).iter().copied().collect()
    }

    pub fn sample(&self, rng: &mut SplitRng) -> Result<NuisancePath, ModelError> {
        let m = self.knots.len();
        for _ in 0..MAX_REJECTIONS {
            let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let values = self.transform(&z);
            if self.admits(&values) {
                return NuisancePath::new(self.knots.clone(), values);
            }
        }
        Err(ModelError::PriorRejection { attempts: MAX_REJECTIONS })
    }
}

/// One draw from the integrated Brownian motion prior, optionally
/// conditioned on `‖η‖_∞ + |η|_α < M` by rejection.
pub fn plr_sample_prior(
    k: u32,
    knots: &[f64],
    rng: &mut SplitRng,
    conditioned: Option<(f64, f64)>,
) -> Result<NuisancePath, ModelError> {
    IbmPrior::new(k, knots, conditioned)?.sample(rng)
}

/// Per-dataset Gaussian algebra for the PLR posterior.
#[derive(Debug, Clone)]
pub struct PlrExact {
    n: usize,
    theta0: f64,
    y: Vec<f64>,
    u: Vec<f64>,
    cells: Vec<(usize, f64)>,
    prior: IbmPrior,
    a_chol: Cholesky<f64, Dyn>,
    g_u: DVector<f64>,
    g_y: DVector<f64>,
    quad: Quadratic,
    degenerate: Option<Quadratic>,
}

/// `log L(θ) = −½(c − 2θb + θ²a)` up to a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, theta: f64) -> f64 {
        -0.5 * (self.c - 2.0 * theta * self.b + theta * theta * self.a)
    }
}

impl PlrExact {
    pub fn new(sample: &SampleSet, config: &PlrConfig) -> Result<Self, ModelError> {
        config.validate()?;
        if sample.dim() != 3 {
            return Err(ModelError::InvalidInput(format!("PLR samples have 3 columns, got {}", sample.dim())));
        }
        if sample.is_empty() {
            return Err(ModelError::InvalidInput("empty sample".into()));
        }
        let prior = IbmPrior::from_config(config)?;
        let knots = prior.knots().to_vec();
        let m = knots.len();
        let n = sample.len();
        let (mut y, mut u, mut cells) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for row in sample.rows() {
            y.push(row[0]);
            u.push(row[1]);
            cells.push(locate(&knots, row[2]));
        }
        // BᵀB, BᵀU, BᵀY accumulate row by row; each row of B has at most two entries.
        let mut btb = DMatrix::<f64>::zeros(m, m);
        let mut bt_u = DVector::<f64>::zeros(m);
        let mut bt_y = DVector::<f64>::zeros(m);
        for (i, &(j, w)) in cells.iter().enumerate() {
            let entries = [(j, 1.0 - w), (j + 1, w)];
            for &(p, wp) in &entries {
                if wp == 0.0 {
                    continue;
                }
                bt_u[p] += wp * u[i];
                bt_y[p] += wp * y[i];
                for &(q, wq) in &entries {
                    if wq != 0.0 {
                        btb[(p, q)] += wp * wq;
                    }
                }
            }
        }
        let l = prior.factor();
        let a_mat = DMatrix::identity(m, m) + l.transpose() * &btb * l;
        let a_chol = Cholesky::new(a_mat).ok_or_else(|| ModelError::IllConditioned("I + LᵀBᵀBL".into()))?;
        let g_u = l.transpose() * bt_u;
        let g_y = l.transpose() * bt_y;
        let ai_gu = a_chol.solve(&g_u);
        let ai_gy = a_chol.solve(&g_y);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let quad = Quadratic {
            a: dot(&u, &u) - g_u.dot(&ai_gu),
            b: dot(&u, &y) - g_u.dot(&ai_gy),
            c: dot(&y, &y) - g_y.dot(&ai_gy),
        };
        let degenerate = (config.nuisance_prior == NuisancePrior::Degenerate).then(|| {
            let r: Vec<f64> = sample.rows().map(|row| row[0] - config.eta0.eval(row[2])).collect();
            Quadratic { a: dot(&u, &u), b: dot(&u, &r), c: dot(&r, &r) }
        });
        Ok(Self { n, theta0: config.theta0, y, u, cells, prior, a_chol, g_u, g_y, quad, degenerate })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prior(&self) -> &IbmPrior {
        &self.prior
    }

    /// Log marginal likelihood of `θ` with `η` integrated out, or the plain
    /// likelihood at `η₀` under the degenerate prior.
    pub fn quadratic(&self) -> Quadratic {
        self.degenerate.unwrap_or(self.quad)
    }

    /// Quadratic under the (unconditioned) Gaussian nuisance prior.
    pub fn gaussian_quadratic(&self) -> Quadratic {
        self.quad
    }

    pub fn local(&self, theta: f64) -> f64 {
        (theta - self.theta0) * (self.n as f64).sqrt()
    }

    pub fn theta(&self, h: f64) -> f64 {
        self.theta0 + h / (self.n as f64).sqrt()
    }

    /// Mean and sd, in `h` coordinates, of the normalized likelihood in `θ`.
    pub fn h_summary(&self) -> (f64, f64) {
        let q = self.quadratic();
        let root_n = (self.n as f64).sqrt();
        (self.local(q.b / q.a), root_n / q.a.sqrt())
    }

    /// Mean of `ξ | θ, Y` where knot values are `Lξ`.
    pub fn xi_mean(&self, theta: f64) -> DVector<f64> {
        self.a_chol.solve(&(&self.g_y - theta * &self.g_u))
    }

    /// Pushes a standard normal `z` to a draw of `ξ | θ, Y`.
    pub fn xi_from_standard(&self, theta: f64, z: &DVector<f64>) -> DVector<f64> {
        let noise = self
            .a_chol
            .l_dirty()
            .tr_solve_lower_triangular(z)
            .expect("Cholesky factor has a positive diagonal");
        self.xi_mean(theta) + noise
    }

    /// Knot values of `η` for a whitened coordinate `ξ`.
    pub fn eta_values(&self, xi: &DVector<f64>) -> Vec<f64> {
        self.prior.transform(xi)
    }

    /// `−½ Σ (yᵢ − θuᵢ − η(vᵢ))²` for `η` given by its knot values.
    pub fn loglik(&self, theta: f64, eta: &[f64]) -> f64 {
        let mut ss = 0.0;
        for i in 0..self.n {
            let (j, w) = self.cells[i];
            let e = if w == 0.0 { eta[j] } else { (1.0 - w) * eta[j] + w * eta[j + 1] };
            let r = self.y[i] - theta * self.u[i] - e;
            ss += r * r;
        }
        -0.5 * ss
    }

    /// `Σ uᵢ²` and `Σ uᵢ (yᵢ − η(vᵢ))`: the sufficient statistics of `θ | η`.
    fn theta_stats(&self, eta: &[f64]) -> (f64, f64) {
        let (mut uu, mut ur) = (0.0, 0.0);
        for i in 0..self.n {
            let (j, w) = self.cells[i];
            let e = if w == 0.0 { eta[j] } else { (1.0 - w) * eta[j] + w * eta[j + 1] };
            uu += self.u[i] * self.u[i];
            ur += self.u[i] * (self.y[i] - e);
        }
        (uu, ur)
    }
}

/// How to compute the marginal posterior of `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlrMode {
    /// Closed-form Gaussian integral over `η` (not available for the
    /// conditioned prior).
    Exact,
    /// Gibbs sampling over `(θ, η)`.
    Mcmc { steps: usize },
}

/// Marginal posterior of `h = √n(θ − θ₀)`.
#[derive(Debug, Clone)]
pub struct PlrPosterior {
    pub h_density: GridDensity,
    /// Effective sample size of the `h` chain; `None` in exact mode.
    pub ess: Option<f64>,
    /// Acceptance rate of the `η` step; 1 unless the prior is conditioned.
    pub accept_rate: Option<f64>,
}

/// Marginal posterior density of `h` on `h_grid`.
pub fn plr_marginal_posterior(
    sample: &SampleSet,
    config: &PlrConfig,
    h_grid: &[f64],
    mode: PlrMode,
    rng: &mut SplitRng,
) -> Result<PlrPosterior, ModelError> {
    let exact = PlrExact::new(sample, config)?;
    match mode {
        PlrMode::Exact => {
            if config.nuisance_prior == NuisancePrior::Conditioned {
                return Err(ModelError::InvalidConfig(
                    "the conditioned nuisance prior has no closed form; use the MCMC mode".into(),
                ));
            }
            let h_density = exact_h_posterior(&exact, config, h_grid)?;
            Ok(PlrPosterior { h_density, ess: None, accept_rate: None })
        }
        PlrMode::Mcmc { steps } => gibbs_h_posterior(&exact, config, h_grid, steps, rng),
    }
}

fn exact_h_posterior(exact: &PlrExact, config: &PlrConfig, h_grid: &[f64]) -> Result<GridDensity, ModelError> {
    let q = exact.quadratic();
    let logs: Vec<f64> = h_grid
        .iter()
        .map(|&h| {
            let theta = exact.theta(h);
            q.eval(theta) + config.theta_prior.ln_density(theta)
        })
        .collect();
    Ok(grid_posterior_from_log(h_grid.to_vec(), logs)?)
}

/// Gibbs sampler over `(θ, ξ)`. `θ | η` is drawn exactly; `ξ | θ` is drawn
/// from its Gaussian conditional and, under the conditioned prior, kept only
/// if the implied path satisfies the constraint (an independence step whose
/// acceptance ratio is the indicator). The `h` density is the average of the
/// exact `θ | η` conditionals over the chain.
fn gibbs_h_posterior(
    exact: &PlrExact,
    config: &PlrConfig,
    h_grid: &[f64],
    steps: usize,
    rng: &mut SplitRng,
) -> Result<PlrPosterior, ModelError> {
    let burn_in = (steps / 5).min(10_000);
    if steps <= burn_in + 1 {
        return Err(ModelError::InvalidInput(format!("{steps} steps leave nothing after burn-in")));
    }
    let m = exact.prior.knots().len();
    let root_n = (exact.n as f64).sqrt();
    let degenerate = config.nuisance_prior == NuisancePrior::Degenerate;
    let eta0_knots: Vec<f64> = exact.prior.knots().iter().map(|&k| config.eta0.eval(k)).collect();

    // start at the exact conditional mean given θ₀, which lies in the support
    // of the conditioned prior whenever η₀ does
    let mut xi = exact.xi_mean(config.theta0);
    let mut eta = if degenerate { eta0_knots.clone() } else { exact.eta_values(&xi) };
    if !exact.prior.admits(&eta) {
        xi = DVector::zeros(m);
        eta = exact.eta_values(&xi);
    }
    let thin = ((steps - burn_in) / 10_000).max(1);
    let mut rb = vec![0.0; h_grid.len()];
    let mut rb_count = 0usize;
    let mut chain = Chain::new(1);
    let mut accepted_eta = 0usize;
    let mut proposed_eta = 0usize;

    for step in 0..steps {
        // θ | η
        let (uu, ur) = if degenerate {
            let q = exact.degenerate.expect("degenerate quadratic");
            (q.a, q.b)
        } else {
            exact.theta_stats(&eta)
        };
        let (theta, cond) = draw_theta(&config.theta_prior, uu, ur, exact, h_grid, rng)?;
        // η | θ
        if !degenerate {
            let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let proposal = exact.xi_from_standard(theta, &z);
            let values = exact.eta_values(&proposal);
            proposed_eta += 1;
            if exact.prior.admits(&values) {
                xi = proposal;
                eta = values;
                accepted_eta += 1;
            }
        }
        if step >= burn_in {
            let h = (theta - config.theta0) * root_n;
            chain.push(&[h], 0.0, true);
            if (step - burn_in) % thin == 0 {
                cond.accumulate(&mut rb, h_grid, exact);
                rb_count += 1;
            }
        }
    }
    let _ = xi;
    let ess = ess_of(&chain.coordinate(0))?;
    if ess < ESS_FLOOR {
        return Err(ModelError::Diagnostics(format!("ESS of h is {ess:.1}, below {ESS_FLOOR}")));
    }
    for v in &mut rb {
        *v /= rb_count as f64;
    }
    let h_density = GridDensity::new(h_grid.to_vec(), rb).map_err(|_| {
        ModelError::Diagnostics("posterior mass of h fell outside the grid".into())
    })?;
    let accept_rate = (proposed_eta > 0).then(|| accepted_eta as f64 / proposed_eta as f64);
    Ok(PlrPosterior { h_density, ess: Some(ess), accept_rate: Some(accept_rate.unwrap_or(1.0)) })
}

/// Full conditional of `θ` given `η`, kept for Rao–Blackwell averaging.
enum ThetaConditional {
    Normal { mean: f64, sd: f64 },
    Grid(GridDensity),
}

impl ThetaConditional {
    fn accumulate(&self, acc: &mut [f64], h_grid: &[f64], exact: &PlrExact) {
        let root_n = (exact.n as f64).sqrt();
        match self {
            ThetaConditional::Normal { mean, sd } => {
                let (hm, hs) = (exact.local(*mean), sd * root_n);
                for (a, &h) in acc.iter_mut().zip(h_grid) {
                    *a += normal_pdf(h, hm, hs);
                }
            }
            ThetaConditional::Grid(d) => {
                for (a, v) in acc.iter_mut().zip(d.values()) {
                    *a += v;
                }
            }
        }
    }
}

fn draw_theta(
    prior: &ThetaPrior,
    uu: f64,
    ur: f64,
    exact: &PlrExact,
    h_grid: &[f64],
    rng: &mut SplitRng,
) -> Result<(f64, ThetaConditional), ModelError> {
    match prior {
        ThetaPrior::Gaussian { mean, sd } => {
            let prec = uu + 1.0 / (sd * sd);
            let m = (ur + mean / (sd * sd)) / prec;
            let s = prec.recip().sqrt();
            let z: f64 = rng.sample(StandardNormal);
            Ok((m + s * z, ThetaConditional::Normal { mean: m, sd: s }))
        }
        ThetaPrior::Grid { .. } => {
            let logs: Vec<f64> = h_grid
                .iter()
                .map(|&h| {
                    let t = exact.theta(h);
                    ur * t - 0.5 * uu * t * t + prior.ln_density(t)
                })
                .collect();
            let d = grid_posterior_from_log(h_grid.to_vec(), logs)?;
            let h = d.sample(rng);
            Ok((exact.theta(h), ThetaConditional::Grid(d)))
        }
    }
}

/// Efficient score `(y − θ₀u − η₀(v))(u − E[U|V=v])` and `Ĩ`.
pub fn plr_efficient_influence(config: &PlrConfig) -> Result<EfficientInfluence, ModelError> {
    config.validate()?;
    let c = config.centered_condexp();
    let eta0 = config.eta0.clone();
    let theta0 = config.theta0;
    let score = move |x: &[f64]| (x[0] - theta0 * x[1] - eta0.eval(x[2])) * (x[1] - c.eval(x[2]));
    Ok(EfficientInfluence::scalar(score, config.efficient_info())?)
}

/// Least-favourable nuisance `η*(θ) = η₀ − (θ − θ₀) E[U|V]`.
pub fn plr_eta_star(theta: f64, config: &PlrConfig) -> NuisancePath {
    let c = config.centered_condexp();
    config.eta0.map(|k, v| v - (theta - config.theta0) * c.eval(k))
}

/// Hellinger distance between the laws of `(Y, U, V)` under `(θ₀, η₁)` and
/// `(θ₀, η₂)`. The laws differ only through the conditional mean of `Y`, so
/// `H² = 2 − 2∫₀¹ exp(−(η₁ − η₂)²/8)`.
pub fn plr_hellinger(eta1: &NuisancePath, eta2: &NuisancePath) -> f64 {
    let mut pts: Vec<f64> = vec![0.0, 1.0];
    pts.extend_from_slice(eta1.knots());
    pts.extend_from_slice(eta2.knots());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let gl = GaussLegendre::new(4);
    let mut h2 = 0.0;
    for w in pts.windows(2) {
        h2 -= 2.0 * gl.integrate(w[0], w[1], |v| (-(eta1.eval(v) - eta2.eval(v)).powi(2) / 8.0).exp_m1());
    }
    h2.max(0.0).sqrt()
}

/// Posterior mass of the Hellinger ball of radius `rho` about `η*(θ)` under
/// the nuisance posterior given `θ = θ₀ + h/√n`, from `draws` draws.
pub fn plr_perturbation_probe(
    sample: &SampleSet,
    config: &PlrConfig,
    h: f64,
    rho: f64,
    draws: usize,
    rng: &mut SplitRng,
) -> Result<f64, ModelError> {
    if !(rho > 0.0) {
        return Err(ModelError::InvalidInput("radius must be positive".into()));
    }
    if draws == 0 {
        return Err(ModelError::InvalidInput("need at least one draw".into()));
    }
    let exact = PlrExact::new(sample, config)?;
    let theta = exact.theta(h);
    let star = plr_eta_star(theta, config);
    let knots = exact.prior.knots().to_vec();
    if config.nuisance_prior == NuisancePrior::Degenerate {
        return Ok(if plr_hellinger(&config.eta0, &star) < rho { 1.0 } else { 0.0 });
    }
    let m = knots.len();
    let mut inside = Vec::with_capacity(draws);
    let mut current: Option<Vec<f64>> = None;
    for _ in 0..draws {
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let values = exact.eta_values(&exact.xi_from_standard(theta, &z));
        if exact.prior.admits(&values) {
            current = Some(values);
        }
        let Some(eta) = &current else { continue };
        let path = NuisancePath::new(knots.clone(), eta.clone())?;
        inside.push(if plr_hellinger(&path, &star) < rho { 1.0 } else { 0.0 });
    }
    if inside.is_empty() {
        return Err(ModelError::Diagnostics("no nuisance draw satisfied the prior constraint".into()));
    }
    if config.nuisance_prior == NuisancePrior::Conditioned {
        let distinct = inside.iter().any(|&x| x != inside[0]);
        if distinct {
            let ess = ess_of(&inside)?;
            if ess < ESS_FLOOR {
                return Err(ModelError::Diagnostics(format!("ESS {ess:.1} below {ESS_FLOOR}")));
            }
        }
    }
    Ok(inside.iter().sum::<f64>() / inside.len() as f64)
}

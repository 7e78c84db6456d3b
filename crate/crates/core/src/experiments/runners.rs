use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde_json::{json, Map};

use super::report::{ConvergenceRow, CoverageRow, ExperimentOutput, IlanRow, PerturbationRow, Report};
use super::svg::{Curve, Figure, Marker, Panel};
use super::{replicate, ExperimentConfig, ExperimentError};
use crate::lan::{delta_tilde, gamma_n, ilan_remainder, integrated_likelihood_ratio, LanError, LocalFrame, LocalRate};
use crate::models::boundary::{boundary_generate, boundary_posterior, exp_location_exact_posterior};
use crate::models::mixture::{dp_gibbs, mixture_generate};
use crate::models::plr::{
    plr_efficient_influence, plr_generate, plr_marginal_posterior, plr_perturbation_probe, IbmPrior, PlrConfig,
    PlrExact,
};
use crate::models::ModelError;
use crate::posterior::grid_posterior;
use crate::rng::SplitRng;
use crate::stats::special::{std_normal_cdf, std_normal_quantile};
use crate::stats::summary::ols_slope;
use crate::stats::{linspace, median, tv_to_law, GaussianLaw, GridDensity, Law, NegExpLaw, SampleSet};

const FIGURE_POINTS: usize = 401;

/// Kolmogorov distance between the density standardized by its own mean
/// and sd and the standard normal, over the grid nodes.
pub fn ks_to_normal(d: &GridDensity) -> f64 {
    let (m, sd) = (d.mean(), d.variance().sqrt());
    let cum = d.cumulative();
    d.grid().iter().zip(&cum).map(|(&x, &c)| (c - std_normal_cdf((x - m) / sd)).abs()).fold(0.0, f64::max)
}

/// Posterior mass of `{|h| ≤ log n}` for a density over `h`.
fn localized_mass(h_density: &GridDensity, n: usize) -> f64 {
    let m = (n as f64).ln();
    h_density.mass_between(-m, m).clamp(0.0, 1.0)
}

fn gaussian(mean: f64, var: f64) -> Result<Law, ModelError> {
    Ok(Law::from(GaussianLaw::univariate(mean, var)?))
}

/// Polyline of `d` thinned to about `FIGURE_POINTS` nodes.
fn density_curve(label: &str, d: &GridDensity) -> Curve {
    let step = d.grid().len().div_ceil(FIGURE_POINTS).max(1);
    let idx: Vec<usize> = (0..d.grid().len()).step_by(step).chain(std::iter::once(d.grid().len() - 1)).collect();
    Curve::solid(label, idx.iter().map(|&i| d.grid()[i]).collect(), idx.iter().map(|&i| d.values()[i]).collect())
}

fn law_curve(label: &str, law: &Law, lo: f64, hi: f64) -> Curve {
    let xs = linspace(lo, hi, FIGURE_POINTS);
    let ys = xs.iter().map(|&x| law.density_1d(x).unwrap_or(0.0)).collect();
    Curve::dashed(label, xs, ys)
}

fn overlay(title: String, x_label: &str, d: &GridDensity, law: &Law) -> Panel {
    Panel {
        title,
        x_label: x_label.into(),
        curves: vec![density_curve("posterior", d), law_curve("limit", law, d.lower(), d.upper())],
        markers: vec![],
    }
}

fn output(config: &ExperimentConfig, report: Report, extras: Map<String, serde_json::Value>, figures: Vec<Figure>) -> ExperimentOutput {
    ExperimentOutput { experiment: config.experiment, seed: config.seed, report, extras, figures }
}

/// Normalized `0.2 + (θ + 1)(2 − θ)` on `[−1, 2]`.
pub fn parametric_prior_density(theta: f64) -> f64 {
    if !(-1.0..=2.0).contains(&theta) {
        return 0.0;
    }
    // ∫₋₁² (θ + 1)(2 − θ) dθ = 9/2
    (0.2 + (theta + 1.0) * (2.0 - theta)) / (0.2 * 3.0 + 4.5)
}

struct ParametricCell {
    row: Option<ConvergenceRow>,
    posterior: GridDensity,
    mle: Option<f64>,
    map: f64,
}

/// Normal means `N(θ, 1)`, `θ ∈ [−1, 2]`, with the polynomial prior: grid
/// posterior against `N(θ̂, 1/n)` where `θ̂` is the MLE restricted to `Θ`.
pub fn run_parametric_demo(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let p = &config.model_params.parametric;
    let grid = linspace(-1.0, 2.0, p.grid_points);
    let cells = replicate(config, |n, r, mut rng| {
        let xs: Vec<f64> = (0..n).map(|_| p.theta0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let sum: f64 = xs.iter().sum();
        let nf = n as f64;
        let posterior = grid_posterior(
            |t| sum * t - 0.5 * nf * t * t,
            |t| parametric_prior_density(t).ln(),
            &grid,
        )?;
        let map = posterior.argmax();
        if n == 0 {
            return Ok(ParametricCell { row: None, posterior, mle: None, map });
        }
        let mle = (sum / nf).clamp(-1.0, 2.0);
        let tv = tv_to_law(&posterior, &gaussian(mle, 1.0 / nf)?)?;
        let root = nf.sqrt();
        let local = posterior.affine(-root * p.theta0, root)?;
        let row = ConvergenceRow {
            n,
            replication: r,
            tv_to_limit: tv,
            delta: root * (mle - p.theta0),
            info_or_gamma: 1.0,
            ess: None,
            localized_mass: localized_mass(&local, n),
            posterior_sd: posterior.variance().sqrt(),
            ks_normal: ks_to_normal(&posterior),
            reference_tv: None,
            interval_gap: None,
        };
        Ok(ParametricCell { row: Some(row), posterior, mle: Some(mle), map })
    })?;

    let rows: Vec<ConvergenceRow> = cells.iter().flatten().filter_map(|c| c.row.clone()).collect();
    let mut panels = Vec::new();
    for (&n, reps) in config.n_values.iter().zip(&cells) {
        let c = &reps[0];
        let mut curves = vec![density_curve(if n == 0 { "prior" } else { "posterior" }, &c.posterior)];
        let mut markers = Vec::new();
        if let Some(mle) = c.mle {
            let law = gaussian(mle, 1.0 / n as f64)?;
            curves.push(law_curve("normal approx.", &law, -1.0, 2.0));
            markers.push(Marker { label: "MLE".into(), x: mle });
        }
        markers.push(Marker { label: "MAP".into(), x: c.map });
        panels.push(Panel { title: format!("n = {n}"), x_label: "θ".into(), curves, markers });
    }
    let figure = Figure { name: "parametric_panels".into(), columns: 3, panels };
    let mut extras = Map::new();
    extras.insert("theta0".into(), json!(p.theta0));
    extras.insert(
        "map".into(),
        json!(config.n_values.iter().zip(&cells).map(|(n, c)| json!({"n": n, "map": c[0].map})).collect::<Vec<_>>()),
    );
    Ok(output(config, Report::Convergence(rows), extras, vec![figure]))
}

struct PlrCell {
    row: ConvergenceRow,
    h_density: GridDensity,
    delta: f64,
    /// Per coverage level: (credible contains 0, Wald contains 0,
    /// credible width, median inside).
    coverage: Vec<(bool, bool, f64, bool)>,
}

fn plr_h_grid(sample: &SampleSet, cfg: &PlrConfig, points: usize) -> Result<Vec<f64>, ModelError> {
    let (c, sd) = PlrExact::new(sample, cfg)?.h_summary();
    Ok(linspace(c - 12.0 * sd, c + 12.0 * sd, points))
}

fn plr_cell(config: &ExperimentConfig, n: usize, r: usize, rng: SplitRng, levels: &[f64]) -> Result<PlrCell, ModelError> {
    let p = &config.model_params;
    let cfg = &p.plr;
    let sample = plr_generate(cfg, n, &mut rng.split(0))?;
    let grid = plr_h_grid(&sample, cfg, p.h_grid_points)?;
    let post = plr_marginal_posterior(&sample, cfg, &grid, p.plr_mode, &mut rng.split(1))?;
    let infl = plr_efficient_influence(cfg)?;
    let delta = delta_tilde(&sample, &infl)?[0];
    let info = cfg.efficient_info();
    let law = gaussian(delta, 1.0 / info)?;
    let d = &post.h_density;
    let z = std_normal_quantile(0.975);
    let (lo, hi) = d.central_interval(0.95);
    let half = z / info.sqrt();
    let gap = (lo - (delta - half)).abs().max((hi - (delta + half)).abs());
    let root = (n as f64).sqrt();
    let row = ConvergenceRow {
        n,
        replication: r,
        tv_to_limit: tv_to_law(d, &law)?,
        delta,
        info_or_gamma: info,
        ess: post.ess,
        localized_mass: localized_mass(d, n),
        posterior_sd: d.variance().sqrt() / root,
        ks_normal: ks_to_normal(d),
        reference_tv: None,
        interval_gap: Some(gap),
    };
    let med = d.quantile(0.5);
    let coverage = levels
        .iter()
        .map(|&level| {
            let (a, b) = d.central_interval(level);
            let w = std_normal_quantile(0.5 + 0.5 * level) / info.sqrt();
            (a <= 0.0 && 0.0 <= b, (delta).abs() <= w, b - a, a <= med && med <= b)
        })
        .collect();
    Ok(PlrCell { row, h_density: post.h_density, delta, coverage })
}

fn plr_figures(config: &ExperimentConfig, cells: &[Vec<PlrCell>], name: &str) -> Result<Figure, ExperimentError> {
    let info = config.model_params.plr.efficient_info();
    let mut panels = Vec::new();
    for (&n, reps) in config.n_values.iter().zip(cells) {
        let c = &reps[0];
        let law = gaussian(c.delta, 1.0 / info)?;
        panels.push(overlay(format!("n = {n}"), "h = √n(θ − θ₀)", &c.h_density, &law));
    }
    Ok(Figure { name: name.into(), columns: 3, panels })
}

/// PLR marginal posterior of `h = √n(θ − θ₀)` against `N(Δ̃ₙ, Ĩ⁻¹)`, with
/// the 95% credible interval compared to the Wald interval `Δ̃ₙ ± z/√Ĩ`.
pub fn run_plr_bvm(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let cells = replicate(config, |n, r, rng| plr_cell(config, n, r, rng, &[]))?;
    let rows = cells.iter().flatten().map(|c| c.row.clone()).collect();
    let figure = plr_figures(config, &cells, "plr_overlays")?;
    let mut extras = Map::new();
    extras.insert("efficient_info".into(), json!(config.model_params.plr.efficient_info()));
    Ok(output(config, Report::Convergence(rows), extras, vec![figure]))
}

/// Empirical coverage of central credible intervals for `θ` and of the Wald
/// intervals, per `n` and level.
pub fn run_coverage(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let levels = config.model_params.coverage_levels.clone();
    let cells = replicate(config, |n, r, rng| plr_cell(config, n, r, rng, &levels))?;
    let info = config.model_params.plr.efficient_info();
    let mut rows = Vec::new();
    for (&n, reps) in config.n_values.iter().zip(&cells) {
        let count = reps.len() as f64;
        for (k, &level) in levels.iter().enumerate() {
            let frac = |f: &dyn Fn(&PlrCell) -> bool| reps.iter().filter(|c| f(c)).count() as f64 / count;
            rows.push(CoverageRow {
                n,
                level,
                replications: reps.len(),
                credible_coverage: frac(&|c| c.coverage[k].0),
                wald_coverage: frac(&|c| c.coverage[k].1),
                credible_width: reps.iter().map(|c| c.coverage[k].2).sum::<f64>() / count / (n as f64).sqrt(),
                wald_width: 2.0 * std_normal_quantile(0.5 + 0.5 * level) / (info * n as f64).sqrt(),
                median_inside: frac(&|c| c.coverage[k].3),
            });
        }
    }
    let figure = plr_figures(config, &cells, "coverage_overlays")?;
    Ok(output(config, Report::Coverage(rows), Map::new(), vec![figure]))
}

struct MixtureCell {
    row: ConvergenceRow,
    sigma_density: GridDensity,
}

/// Dirichlet-mixture posterior for the kernel scale `σ`: normality of the
/// `σ`-marginal and the scaling of its standard deviation with `n`.
pub fn run_mixture_bvm(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let p = &config.model_params;
    let cfg = &p.mixture;
    let cells = replicate(config, |n, r, rng| {
        let sample = mixture_generate(cfg, n, &mut rng.split(0))?;
        let chain = dp_gibbs(&sample, cfg, p.mixture_iters, &mut rng.split(1))?;
        let d = chain.sigma_density()?;
        let (m, sd) = (d.mean(), d.variance().sqrt());
        let root = (n as f64).sqrt();
        let local = d.affine(-root * cfg.sigma0, root)?;
        let row = ConvergenceRow {
            n,
            replication: r,
            tv_to_limit: tv_to_law(&d, &gaussian(m, sd * sd)?)?,
            delta: root * (m - cfg.sigma0),
            info_or_gamma: 1.0 / (n as f64 * sd * sd),
            ess: Some(chain.ess),
            localized_mass: localized_mass(&local, n),
            posterior_sd: sd,
            ks_normal: ks_to_normal(&d),
            reference_tv: None,
            interval_gap: None,
        };
        Ok(MixtureCell { row, sigma_density: d })
    })?;
    let rows: Vec<ConvergenceRow> = cells.iter().flatten().map(|c| c.row.clone()).collect();
    let mut extras = Map::new();
    if config.n_values.len() >= 2 {
        let logn: Vec<f64> = config.n_values.iter().map(|&n| (n as f64).ln()).collect();
        let per_rep: Vec<f64> = (0..config.replications)
            .map(|r| {
                let ls: Vec<f64> = cells.iter().map(|reps| reps[r].row.posterior_sd.ln()).collect();
                ols_slope(&logn, &ls)
            })
            .collect();
        let med_sd: Vec<f64> = cells
            .iter()
            .map(|reps| median(&reps.iter().map(|c| c.row.posterior_sd).collect::<Vec<_>>()).ln())
            .collect();
        extras.insert("sd_slope_median".into(), json!(median(&per_rep)));
        extras.insert("sd_slope_of_medians".into(), json!(ols_slope(&logn, &med_sd)));
        extras.insert("sd_slope_per_replication".into(), json!(per_rep));
    }
    let mut panels = Vec::new();
    for (&n, reps) in config.n_values.iter().zip(&cells) {
        let d = &reps[0].sigma_density;
        let law = gaussian(d.mean(), d.variance())?;
        let mut panel = overlay(format!("n = {n}"), "σ", d, &law);
        panel.curves[1].label = "normal fit".into();
        panel.markers.push(Marker { label: "σ₀".into(), x: cfg.sigma0 });
        panels.push(panel);
    }
    let figure = Figure { name: "mixture_sigma".into(), columns: 3, panels };
    Ok(output(config, Report::Convergence(rows), extras, vec![figure]))
}

struct BoundaryCell {
    row: ConvergenceRow,
    h_density: GridDensity,
    exact: GridDensity,
    x1: f64,
}

/// Support-boundary posterior of `h = n(θ − θ₀)` against `Exp⁻(Δₙ, γ)`,
/// plus the exact exponential-location posterior against `Exp⁻(X₍₁₎, n)`.
pub fn run_boundary_bvm(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let p = &config.model_params;
    let cfg = &p.boundary;
    let cells = replicate(config, |n, r, rng| {
        let sample = boundary_generate(cfg, n, &mut rng.split(0))?;
        let post = boundary_posterior(&sample, cfg, p.boundary_iters, &mut rng.split(1))?;
        let law = Law::from(NegExpLaw::new(post.delta_n, post.gamma)?);
        let d = &post.h_density;

        let mut erng = rng.split(2);
        let xs: Vec<f64> = (0..n).map(|_| cfg.theta0 + erng.sample::<f64, _>(Exp1)).collect();
        let exp_sample = SampleSet::scalar(xs, erng.seed())?;
        let exact = exp_location_exact_posterior(&exp_sample, &cfg.theta_prior)?;
        let x1 = exp_sample.min_scalar();
        let reference = tv_to_law(&exact, &Law::from(NegExpLaw::new(x1, n as f64)?))?;

        let row = ConvergenceRow {
            n,
            replication: r,
            tv_to_limit: tv_to_law(d, &law)?,
            delta: post.delta_n,
            info_or_gamma: post.gamma,
            ess: post.ess,
            localized_mass: localized_mass(d, n),
            posterior_sd: d.variance().sqrt() / n as f64,
            ks_normal: ks_to_normal(d),
            reference_tv: Some(reference),
            interval_gap: None,
        };
        Ok(BoundaryCell { row, h_density: post.h_density, exact, x1 })
    })?;
    let rows = cells.iter().flatten().map(|c| c.row.clone()).collect();
    let mut panels = Vec::new();
    let mut exact_panels = Vec::new();
    for (&n, reps) in config.n_values.iter().zip(&cells) {
        let c = &reps[0];
        let law = Law::from(NegExpLaw::new(c.row.delta, c.row.info_or_gamma).map_err(ModelError::from)?);
        panels.push(overlay(format!("n = {n}"), "h = n(θ − θ₀)", &c.h_density, &law));
        let exact_law = Law::from(NegExpLaw::new(c.x1, n as f64).map_err(ModelError::from)?);
        exact_panels.push(overlay(format!("n = {n}"), "θ", &c.exact, &exact_law));
    }
    let figures = vec![
        Figure { name: "boundary_overlays".into(), columns: 3, panels },
        Figure { name: "exponential_location_exact".into(), columns: 3, panels: exact_panels },
    ];
    let mut extras = Map::new();
    extras.insert("gamma".into(), json!(cfg.gamma()?));
    Ok(output(config, Report::Convergence(rows), extras, figures))
}

/// Expansion of the integrated likelihood `sₙ(h)/sₙ(0)` against
/// `hΓₙ − ½h²Ĩ`, estimated from draws of `η | θ₀, X` with common random
/// numbers across `h`, next to the closed form and the plain prior-draw
/// estimator.
pub fn run_ilan_probe(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let p = &config.model_params;
    let cfg = &p.plr;
    let hs = p.ilan_h.clone();
    let cells = replicate(config, |n, r, rng| {
        let sample = plr_generate(cfg, n, &mut rng.split(0))?;
        let exact = PlrExact::new(&sample, cfg)?;
        let infl = plr_efficient_influence(cfg)?;
        let gamma = gamma_n(&sample, &infl)?[0];
        let info = infl.scalar_info();
        let frame = LocalFrame::new(cfg.theta0, LocalRate::SqrtN);
        let knots = cfg.prior_knots();
        let m = knots.len();

        let mut zrng = rng.split(1);
        let conditional: Vec<Vec<f64>> = (0..p.ilan_draws)
            .map(|_| {
                let z = DVector::from_fn(m, |_, _| zrng.sample::<f64, _>(StandardNormal));
                exact.eta_values(&exact.xi_from_standard(cfg.theta0, &z))
            })
            .collect();
        let prior = IbmPrior::from_config(cfg)?;
        let mut prng = rng.split(2);
        let prior_draws: Vec<Vec<f64>> = (0..p.ilan_draws)
            .map(|_| prior.sample(&mut prng).map(|path| path.values().to_vec()))
            .collect::<Result<_, _>>()?;
        let eta0 = cfg.eta0.resample(&knots)?.values().to_vec();
        let loglik = |theta: f64, eta: &Vec<f64>, _: &SampleSet| exact.loglik(theta, eta);
        let q = exact.quadratic();

        let mut rows = Vec::with_capacity(hs.len());
        for &h in &hs {
            let lan = h * gamma - 0.5 * h * h * info;
            let log_ratio = integrated_likelihood_ratio(&sample, h, &conditional, &loglik, &frame)?;
            let exact_log_ratio = q.eval(exact.theta(h)) - q.eval(cfg.theta0);
            let naive = match ilan_remainder(&sample, h, &prior_draws, &eta0, &loglik, &frame, &infl) {
                Ok(v) if v.is_finite() => Some(v),
                Ok(_) | Err(LanError::NoFiniteTerms) => None,
                Err(e) => return Err(e.into()),
            };
            rows.push(IlanRow {
                n,
                replication: r,
                h,
                log_ratio,
                exact_log_ratio,
                remainder: log_ratio - lan,
                exact_remainder: exact_log_ratio - lan,
                naive_remainder: naive,
            });
        }
        Ok(rows)
    })?;
    let rows: Vec<IlanRow> = cells.into_iter().flatten().flatten().collect();
    let mut extras = Map::new();
    let per_n: Vec<_> = config
        .n_values
        .iter()
        .map(|&n| {
            let abs: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.remainder.abs()).collect();
            let gap: Vec<f64> =
                rows.iter().filter(|r| r.n == n).map(|r| (r.log_ratio - r.exact_log_ratio).abs()).collect();
            json!({"n": n, "median_abs_remainder": median(&abs), "max_mc_vs_exact": gap.iter().cloned().fold(0.0, f64::max)})
        })
        .collect();
    extras.insert("per_n".into(), json!(per_n));
    let mut curves = Vec::new();
    let xs: Vec<f64> = config.n_values.iter().map(|&n| (n as f64).ln()).collect();
    for &h in &hs {
        let ys: Vec<f64> = config
            .n_values
            .iter()
            .map(|&n| median(&rows.iter().filter(|r| r.n == n && r.h == h).map(|r| r.remainder.abs()).collect::<Vec<_>>()))
            .collect();
        curves.push(Curve::solid(format!("h = {h}"), xs.clone(), ys));
    }
    let figure = Figure {
        name: "ilan_remainder".into(),
        columns: 1,
        panels: vec![Panel { title: "median |remainder|".into(), x_label: "log n".into(), curves, markers: vec![] }],
    };
    Ok(output(config, Report::Ilan(rows), extras, vec![figure]))
}

/// Nuisance posterior mass of a Hellinger ball about `η*(θ₀ + h/√n)`.
pub fn run_perturbation_probe(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let p = &config.model_params;
    let cfg = &p.plr;
    let cells = replicate(config, |n, r, rng| {
        let sample = plr_generate(cfg, n, &mut rng.split(0))?;
        p.perturbation_h
            .iter()
            .enumerate()
            .map(|(k, &h)| {
                let mass = plr_perturbation_probe(
                    &sample,
                    cfg,
                    h,
                    p.perturbation_radius,
                    p.perturbation_draws,
                    &mut rng.split(1 + k as u64),
                )?;
                Ok(PerturbationRow { n, replication: r, h, radius: p.perturbation_radius, mass })
            })
            .collect::<Result<Vec<_>, ModelError>>()
    })?;
    let rows: Vec<PerturbationRow> = cells.into_iter().flatten().flatten().collect();
    let xs: Vec<f64> = config.n_values.iter().map(|&n| (n as f64).ln()).collect();
    let curves = p
        .perturbation_h
        .iter()
        .map(|&h| {
            let ys = config
                .n_values
                .iter()
                .map(|&n| median(&rows.iter().filter(|r| r.n == n && r.h == h).map(|r| r.mass).collect::<Vec<_>>()))
                .collect();
            Curve::solid(format!("h = {h}"), xs.clone(), ys)
        })
        .collect();
    let figure = Figure {
        name: "perturbation_mass".into(),
        columns: 1,
        panels: vec![Panel { title: "median ball mass".into(), x_label: "log n".into(), curves, markers: vec![] }],
    };
    Ok(output(config, Report::Perturbation(rows), Map::new(), vec![figure]))
}

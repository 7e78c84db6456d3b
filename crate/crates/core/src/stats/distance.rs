//! Distances between tabulated densities.
//!
//! Both densities are compared on the union of their grids. On every cell of
//! the union grid each density is either its own linear interpolant (the cell
//! lies inside its grid range) or identically zero, so support endpoints become
//! genuine jumps rather than being smeared over a neighbouring cell. Each cell
//! contributes its two one-sided endpoint ordinates with trapezoid weights.
//! This turns both densities into probability vectors over the same atoms, so
//! the metric and Le Cam inequalities hold exactly up to rounding.

use super::density::linspace;
use super::{GridDensity, Law, StatError};

/// Tail mass left untabulated when a law is laid out on a grid.
pub const LAW_TAIL_MASS: f64 = 1e-10;
const LAW_GRID_POINTS: usize = 4001;

fn union_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            i += 1;
            a[i - 1]
        } else {
            j += 1;
            b[j - 1]
        };
        if out.last().is_none_or(|&last| next > last) {
            out.push(next);
        }
    }
    out
}

/// Cell-wise one-sided ordinates `(width, p_left, p_right, q_left, q_right)`.
fn paired_cells<'a>(
    p: &'a GridDensity,
    q: &'a GridDensity,
    grid: &'a [f64],
) -> impl Iterator<Item = (f64, f64, f64, f64, f64)> + 'a {
    let one_sided = |d: &GridDensity, a: f64, b: f64| {
        if a >= d.lower() && b <= d.upper() {
            (d.eval(a), d.eval(b))
        } else {
            (0.0, 0.0)
        }
    };
    grid.windows(2).map(move |w| {
        let (pl, pr) = one_sided(p, w[0], w[1]);
        let (ql, qr) = one_sided(q, w[0], w[1]);
        (w[1] - w[0], pl, pr, ql, qr)
    })
}

/// Total variation distance `½∫|p − q|`.
pub fn tv_distance(p: &GridDensity, q: &GridDensity) -> f64 {
    let grid = union_grid(p.grid(), q.grid());
    let sum: f64 = paired_cells(p, q, &grid)
        .map(|(w, pl, pr, ql, qr)| 0.5 * w * ((pl - ql).abs() + (pr - qr).abs()))
        .sum();
    (0.5 * sum).clamp(0.0, 1.0)
}

/// Hellinger distance `(∫(√p − √q)²)^½`, in `[0, √2]`.
pub fn hellinger_distance(p: &GridDensity, q: &GridDensity) -> f64 {
    let grid = union_grid(p.grid(), q.grid());
    let sq: f64 = paired_cells(p, q, &grid)
        .map(|(w, pl, pr, ql, qr)| {
            0.5 * w * ((pl.sqrt() - ql.sqrt()).powi(2) + (pr.sqrt() - qr.sqrt()).powi(2))
        })
        .sum();
    sq.max(0.0).sqrt().min(std::f64::consts::SQRT_2)
}

/// Tabulates a univariate law on a fine grid covering all but
/// [`LAW_TAIL_MASS`] of its mass, merged with the nodes of `along` that fall
/// inside that range.
pub fn tabulate_law(law: &Law, along: Option<&[f64]>) -> Result<GridDensity, StatError> {
    if law.dim() != 1 {
        return Err(StatError::UnsupportedMultivariate);
    }
    let (lo, hi) = law.effective_support(LAW_TAIL_MASS)?;
    let fine = linspace(lo, hi, LAW_GRID_POINTS);
    let grid = match along {
        Some(g) => {
            let inside: Vec<f64> = g.iter().copied().filter(|&x| x > lo && x < hi).collect();
            union_grid(&fine, &inside)
        }
        None => fine,
    };
    let raw = grid
        .iter()
        .map(|&x| law.density_1d(x))
        .collect::<Result<Vec<_>, _>>()?;
    GridDensity::new(grid, raw)
}

/// Total variation between a tabulated density and an analytic univariate law.
///
/// The law is tabulated by [`tabulate_law`] and compared with
/// [`tv_distance`]; half of the untabulated tail mass is added back.
pub fn tv_to_law(p: &GridDensity, law: &Law) -> Result<f64, StatError> {
    let tab = tabulate_law(law, Some(p.grid()))?;
    Ok((tv_distance(p, &tab) + 0.5 * LAW_TAIL_MASS).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::special::{normal_pdf, std_normal_cdf};
    use crate::stats::{GaussianLaw, NegExpLaw};

    fn normal_grid(mu: f64, lo: f64, hi: f64, n: usize) -> GridDensity {
        GridDensity::tabulate(linspace(lo, hi, n), |x| normal_pdf(x, mu, 1.0)).unwrap()
    }

    #[test]
    fn identical_densities() {
        let p = normal_grid(0.0, -6.0, 6.0, 301);
        assert_eq!(tv_distance(&p, &p), 0.0);
        assert_eq!(hellinger_distance(&p, &p), 0.0);
    }

    #[test]
    fn shifted_normals_closed_form() {
        let p = normal_grid(0.0, -8.0, 9.0, 4001);
        let q = normal_grid(1.0, -8.0, 9.0, 4001);
        let exact = 2.0 * std_normal_cdf(0.5) - 1.0;
        assert!((exact - 0.382_925).abs() < 1e-6);
        assert!((tv_distance(&p, &q) - exact).abs() < 1e-4);
    }

    #[test]
    fn disjoint_supports() {
        let p = GridDensity::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let q = GridDensity::new(vec![2.0, 3.0], vec![1.0, 1.0]).unwrap();
        assert!((tv_distance(&p, &q) - 1.0).abs() < 1e-8);
        assert!((hellinger_distance(&p, &q) - std::f64::consts::SQRT_2).abs() < 1e-6);
        // touching supports still separate
        let r = GridDensity::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert!((tv_distance(&p, &r) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn exponential_hellinger() {
        let grid = linspace(0.0, 40.0, 40_001);
        let p = GridDensity::tabulate(grid.clone(), |x| (-x).exp()).unwrap();
        let q = GridDensity::tabulate(grid, |x| 2.0 * (-2.0 * x).exp()).unwrap();
        let exact = (2.0 - 4.0 * 2f64.sqrt() / 3.0).sqrt();
        assert!((hellinger_distance(&p, &q) - exact).abs() < 1e-3);
    }

    #[test]
    fn law_self_distance() {
        let law = Law::from(GaussianLaw::standard(1));
        let p = normal_grid(0.0, -7.0, 7.0, 20_001);
        assert!(tv_to_law(&p, &law).unwrap() < 1e-6);
        let law = Law::from(NegExpLaw::new(0.0, 1.0).unwrap());
        let p = GridDensity::tabulate(linspace(-25.0, 0.0, 20_001), |x| x.exp()).unwrap();
        assert!(tv_to_law(&p, &law).unwrap() < 1e-6);
    }

    #[test]
    fn law_distance_matches_merged_grid() {
        let p = normal_grid(0.0, -8.0, 8.0, 3201);
        let law = Law::from(NegExpLaw::new(0.0, 1.0).unwrap());
        let via_law = tv_to_law(&p, &law).unwrap();
        // brute force: midpoint rule for |p - law| on a fine grid with a node at
        // the law's jump
        let mut grid = linspace(-30.0, 0.0, 300_001);
        grid.extend(linspace(0.0, 8.0, 80_001).into_iter().skip(1));
        let brute = 0.5 * grid
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                let q = if m <= 0.0 { m.exp() } else { 0.0 };
                (w[1] - w[0]) * (p.eval(m) - q).abs()
            })
            .sum::<f64>();
        assert!(via_law > 0.0 && via_law < 1.0);
        assert!((via_law - brute).abs() < 1e-6, "law {via_law} brute {brute}");
    }

    #[test]
    fn shifted_normal_to_law() {
        let p = normal_grid(0.5, -8.0, 9.0, 4001);
        let law = Law::from(GaussianLaw::standard(1));
        let exact = 2.0 * std_normal_cdf(0.25) - 1.0;
        assert!((tv_to_law(&p, &law).unwrap() - exact).abs() < 1e-4);
    }

    #[test]
    fn multivariate_law_unsupported() {
        let p = normal_grid(0.0, -5.0, 5.0, 11);
        let law = Law::from(GaussianLaw::standard(2));
        assert!(matches!(tv_to_law(&p, &law), Err(StatError::UnsupportedMultivariate)));
    }
}

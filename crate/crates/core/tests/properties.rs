use bvmlab::experiments::{ConvergenceRow, ExperimentConfig, ExperimentKind, Report};
use bvmlab::rng::SplitRng;
use bvmlab::stats::{hellinger_distance, linspace, tv_distance, GridDensity};
use proptest::prelude::*;
use rand::RngCore;

fn density() -> impl Strategy<Value = GridDensity> {
    (-5.0..5.0f64, 0.5..6.0f64, prop::collection::vec(0.01..10.0f64, 3..40)).prop_map(|(lo, width, vals)| {
        let grid = linspace(lo, lo + width, vals.len());
        GridDensity::new(grid, vals).unwrap()
    })
}

fn row() -> impl Strategy<Value = ConvergenceRow> {
    (
        1usize..5000,
        0usize..100,
        0.0..1.0f64,
        -10.0..10.0f64,
        prop::option::of(1.0..1e4f64),
        prop::option::of(0.0..1.0f64),
    )
        .prop_map(|(n, replication, tv, delta, ess, gap)| ConvergenceRow {
            n,
            replication,
            tv_to_limit: tv,
            delta,
            info_or_gamma: 0.75,
            ess,
            localized_mass: 1.0 - tv / 3.0,
            posterior_sd: tv.sqrt() + 1e-3,
            ks_normal: tv / 7.0,
            reference_tv: ess.map(|e| 1.0 / e),
            interval_gap: gap,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn densities_integrate_to_one(d in density()) {
        let cum = d.cumulative();
        prop_assert!((cum[cum.len() - 1] - 1.0).abs() < 1e-12);
        prop_assert!(cum.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn quantile_inverts_cdf(d in density(), p in 0.01..0.99f64) {
        let x = d.quantile(p);
        prop_assert!(x >= d.lower() && x <= d.upper());
        prop_assert!((d.cdf(x) - p).abs() < 1e-9);
    }

    #[test]
    fn tv_is_a_bounded_metric(p in density(), q in density(), r in density()) {
        let pq = tv_distance(&p, &q);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        prop_assert!((pq - tv_distance(&q, &p)).abs() < 1e-12);
        prop_assert!(tv_distance(&p, &p) < 1e-12);
        prop_assert!(pq <= tv_distance(&p, &r) + tv_distance(&r, &q) + 1e-9);
    }

    #[test]
    fn hellinger_bounds_tv(p in density(), q in density()) {
        // H²/2 ≤ TV ≤ H with H² = ∫(√p − √q)²
        let h = hellinger_distance(&p, &q);
        let tv = tv_distance(&p, &q);
        prop_assert!(h * h / 2.0 <= tv + 1e-6, "h {} tv {}", h, tv);
        prop_assert!(tv <= h + 1e-6, "h {} tv {}", h, tv);
    }

    #[test]
    fn affine_maps_moments(d in density(), offset in -3.0..3.0f64, scale in 0.1..10.0f64) {
        let a = d.affine(offset, scale).unwrap();
        prop_assert!((a.mean() - (offset + scale * d.mean())).abs() < 1e-9 * (1.0 + scale));
        prop_assert!((a.variance() - scale * scale * d.variance()).abs() < 1e-9 * (1.0 + scale * scale));
        prop_assert!((a.cumulative().last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_streams_are_deterministic(seed in any::<u64>(), i in 0u64..1000, j in 0u64..1000) {
        let mut a = SplitRng::new(seed).split_path(&[i, j]);
        let mut b = SplitRng::new(seed).split_path(&[i, j]);
        prop_assert_eq!(a.next_u64(), b.next_u64());
        let mut other = SplitRng::new(seed).split_path(&[i, j + 1]);
        let mut same = SplitRng::new(seed).split_path(&[i, j]);
        prop_assert_ne!(same.next_u64(), other.next_u64());
    }

    #[test]
    fn convergence_csv_roundtrips(rows in prop::collection::vec(row(), 0..20)) {
        let report = Report::Convergence(rows);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        prop_assert_eq!(report.read_csv_like(buf.as_slice()).unwrap(), report);
    }

    #[test]
    fn config_json_roundtrips(seed in any::<u64>(), reps in 1usize..50, start in 1usize..100, steps in 1usize..5) {
        let n_values: Vec<usize> = (0..steps).map(|k| start << (2 * k)).collect();
        let c = ExperimentConfig::new(ExperimentKind::PlrBvm, n_values, reps, seed);
        let text = serde_json::to_string(&c).unwrap();
        prop_assert_eq!(ExperimentConfig::from_json_str(&text).unwrap(), c);
    }
}

use proptest::prelude::*;
use rand::Rng;

use gradfree::optim::{argmin_lowest, rounds_for, run_gfm, schedule_eta, RunConfig, ScheduleInputs};
use gradfree::problems::{make_halfspace_distance, make_norm, make_tight_mixture, PiecewiseLinear1D};
use gradfree::{derive_stream, sample_unit_ball, sample_unit_sphere, two_point_estimate, SmoothingParams};

fn unit_w(dim: usize, seed: u64) -> Vec<f64> {
    let mut r = derive_stream(seed, "w", 0);
    (0..dim).map(|_| r.random::<f64>() - 0.5 + 1e-3).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimate_is_collinear_and_bounded(
        dim in 1usize..20,
        lip in 0.1f64..5.0,
        delta in 1e-3f64..2.0,
        seed in any::<u64>(),
        which in 0usize..3,
    ) {
        let w = unit_w(dim, seed);
        let p = match which {
            0 => make_norm(dim, lip).unwrap(),
            1 => make_halfspace_distance(dim, lip, &w).unwrap(),
            _ => make_tight_mixture(dim, lip, &w).unwrap(),
        };
        let params = SmoothingParams::with_delta(delta).unwrap();
        let mut rng = derive_stream(seed, "prop-estimate", 0);
        let x: Vec<f64> = (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        for _ in 0..8 {
            let g = two_point_estimate(&p, &x, &params, &mut rng).unwrap();
            let gn = g.estimate.norm();
            prop_assert!(gn <= dim as f64 * lip * (1.0 + 1e-12));
            let coef = dim as f64 / (2.0 * delta) * (g.value_plus - g.value_minus);
            for (e, d) in g.estimate.as_slice().iter().zip(g.direction.as_slice()) {
                prop_assert_eq!(*e, coef * d);
            }
            prop_assert!((g.direction.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_and_ball_draws(dim in 1usize..64, seed in any::<u64>()) {
        let mut rng = derive_stream(seed, "prop-draws", 0);
        let s = sample_unit_sphere(dim, &mut rng).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        let b = sample_unit_ball(dim, &mut rng).unwrap();
        prop_assert!(b.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn eta_quarter_law(
        dim in 1usize..500,
        lip in 0.01f64..10.0,
        gap in 0.01f64..100.0,
        delta in 1e-4f64..1.0,
        t in 1u64..1_000_000,
    ) {
        let i = ScheduleInputs::new(dim, lip, gap, delta);
        prop_assert_eq!(schedule_eta(&i, 4 * t).unwrap(), schedule_eta(&i, t).unwrap() / 2.0);
    }

    #[test]
    fn rounds_is_smallest_doubling(lambda in 1e-6f64..0.999) {
        let s = rounds_for(lambda).unwrap();
        prop_assert!(2f64.powi(s as i32) * lambda >= 2.0);
        prop_assert!(2f64.powi(s as i32 - 1) * lambda < 2.0);
    }

    #[test]
    fn argmin_is_minimal_and_lowest(values in prop::collection::vec(0u8..6, 1..30)) {
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        let i = argmin_lowest(&v).unwrap();
        prop_assert!(v.iter().all(|&x| v[i] <= x));
        prop_assert!(v[..i].iter().all(|&x| x > v[i]));
    }

    #[test]
    fn goldstein_membership_random_pwl(
        n_kinks in 0usize..6,
        seed in any::<u64>(),
        x in -4.0f64..4.0,
        delta in 1e-3f64..3.0,
    ) {
        let mut r = derive_stream(seed, "prop-pwl", 0);
        let mut bps: Vec<f64> = (0..n_kinks).map(|_| 6.0 * r.random::<f64>() - 3.0).collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let slopes: Vec<f64> = (0..=bps.len()).map(|_| 6.0 * r.random::<f64>() - 3.0).collect();
        let f = PiecewiseLinear1D::new(bps, slopes, 0.3).unwrap();
        let iv = f.goldstein_interval(x, delta);
        let g = f.smoothed_gradient(x, delta);
        prop_assert!(iv.contains(g, 1e-8), "g {} not in [{}, {}]", g, iv.lo, iv.hi);
        prop_assert!(iv.lo <= iv.hi);
        let fd = f.smoothed_value(x, delta, 1e-12);
        prop_assert!((fd - f.value(x)).abs() <= delta * f.lipschitz() + 1e-9);
    }

    #[test]
    fn derived_streams_ignore_parent_position(seed in any::<u64>(), skip in 0usize..50, idx in 0u32..1000) {
        let parent = derive_stream(seed, "prop-parent", 0);
        let mut advanced = parent.clone();
        for _ in 0..skip {
            let _: u64 = advanced.random();
        }
        let a: u64 = parent.derive("child", idx).random();
        let b: u64 = advanced.derive("child", idx).random();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gfm_deterministic_and_scale_invariant(
        dim in 1usize..8,
        seed in any::<u64>(),
        log_alpha in -3i32..4,
        horizon in 1u64..200,
    ) {
        let alpha = 2f64.powi(log_alpha);
        let f = make_norm(dim, 1.0).unwrap();
        let g = make_norm(dim, alpha).unwrap();
        let params = SmoothingParams::with_delta(0.1).unwrap();
        let cfg = |eta: f64| {
            RunConfig::new(eta, horizon, params, derive_stream(seed, "prop-gfm", 0))
                .unwrap()
                .with_trajectory(true)
                .with_reference_batch(0)
        };
        let a = run_gfm(&f, &cfg(1e-2)).unwrap();
        let a2 = run_gfm(&f, &cfg(1e-2)).unwrap();
        prop_assert_eq!(&a, &a2);
        let b = run_gfm(&g, &cfg(1e-2 / alpha)).unwrap();
        let xa: Vec<_> = a.trajectory.unwrap().into_iter().map(|p| p.x).collect();
        let xb: Vec<_> = b.trajectory.unwrap().into_iter().map(|p| p.x).collect();
        prop_assert_eq!(xa, xb);
        prop_assert!(a.output_index < horizon);
    }
}

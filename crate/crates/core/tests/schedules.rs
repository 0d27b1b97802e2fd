use gradfree::optim::{
    descent_bound, oracle_complexity_bound, rounds_for, schedule_eta, schedule_two_phase, second_moment_bound, Caps,
    ScheduleInputs,
};
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    dim: usize,
    lipschitz: f64,
    value_gap: f64,
    delta: f64,
    target: f64,
    confidence: f64,
    smoothing_constant: f64,
    horizon: u64,
    eta: String,
    horizon_exact: String,
    horizon_ceil: u64,
    rounds: u32,
    batch_exact: String,
    batch_ceil: u64,
}

fn cases() -> Vec<Case> {
    serde_json::from_str(include_str!("data/schedule_oracle.json")).unwrap()
}

fn inputs(c: &Case) -> ScheduleInputs {
    ScheduleInputs::new(c.dim, c.lipschitz, c.value_gap, c.delta)
        .with_target(c.target)
        .with_confidence(c.confidence)
        .with_smoothing_constant(c.smoothing_constant)
}

fn rel(a: f64, b: &str) -> f64 {
    let b: f64 = b.parse().unwrap();
    (a - b).abs() / b.abs()
}

#[test]
fn matches_high_precision_oracle() {
    let cs = cases();
    assert_eq!(cs.len(), 20);
    for c in &cs {
        let i = inputs(c);
        let eta = schedule_eta(&i, c.horizon).unwrap();
        assert!(rel(eta, &c.eta) <= 1e-12, "eta {eta} vs {}", c.eta);
        let s = schedule_two_phase(&i).unwrap();
        assert!(rel(s.horizon_exact, &c.horizon_exact) <= 1e-12);
        assert!(rel(s.batch_exact, &c.batch_exact) <= 1e-12);
        assert_eq!(s.rounds, c.rounds);
        assert_eq!(s.horizon, c.horizon_ceil);
        assert_eq!(s.batch, c.batch_ceil);
    }
    assert!(cs.iter().any(|c| c.confidence == 0.5 && c.rounds == 2));
    assert!(cs.iter().any(|c| c.confidence == 0.05 && c.rounds == 6));
}

#[test]
fn step_size_example() {
    let i = ScheduleInputs::new(4, 1.0, 1.0, 0.1);
    let eta = schedule_eta(&i, 10_000).unwrap();
    let by_hand = 0.1 * (0.1f64 * 1.1 / (1.5 * 8.0 * 1e4)).sqrt();
    assert!((eta - by_hand).abs() <= 1e-15 * by_hand);
    assert!((eta - 9.574e-5).abs() < 5e-8);
}

#[test]
fn step_size_scaling_laws() {
    let i = ScheduleInputs::new(6, 1.3, 2.0, 0.05);
    for t in [1u64, 17, 1_000, 123_456] {
        assert_eq!(schedule_eta(&i, 4 * t).unwrap(), schedule_eta(&i, t).unwrap() / 2.0);
    }
    // gap >> delta L: doubling L shrinks eta by about 2^1.5
    let a = ScheduleInputs::new(3, 1.0, 1e6, 0.01);
    let b = ScheduleInputs::new(3, 2.0, 1e6, 0.01);
    let ratio = schedule_eta(&a, 100).unwrap() / schedule_eta(&b, 100).unwrap();
    assert!((ratio - 2f64.powf(1.5)).abs() < 1e-6);
}

#[test]
fn round_counts() {
    for (lambda, s) in [(0.5, 2), (0.05, 6), (0.1, 5), (0.25, 3), (0.125, 4), (0.9, 2), (0.01, 8)] {
        assert_eq!(rounds_for(lambda).unwrap(), s, "lambda {lambda}");
    }
}

#[test]
fn batch_example_d2() {
    let i = ScheduleInputs::new(2, 1.0, 1.0, 0.1).with_target(0.5).with_confidence(0.1);
    let s = schedule_two_phase(&i).unwrap();
    let by_hand = 384.0 * (2.0 * std::f64::consts::PI).sqrt() * 2.0 * 6.0 / (0.1 * 0.25);
    assert_eq!(s.rounds, 5);
    assert!((s.batch_exact - by_hand).abs() <= 1e-12 * by_hand);
    assert_eq!(s.batch, 462_022);
}

#[test]
fn complexity_order_estimate_scaling() {
    let i = ScheduleInputs::new(4, 1.0, 1.0, 0.1).with_target(0.4);
    let base = oracle_complexity_bound(&i).unwrap();
    let half_eps = oracle_complexity_bound(&i.with_target(0.2)).unwrap();
    assert!((half_eps / base - 16.0).abs() < 1e-12);
    let quad_d = oracle_complexity_bound(&ScheduleInputs::new(16, 1.0, 1.0, 0.1).with_target(0.4)).unwrap();
    assert!((quad_d / base - 8.0).abs() < 1e-12);
    let big_gap = ScheduleInputs::new(4, 1.0, 1e8, 0.1).with_target(0.4);
    let r = oracle_complexity_bound(&ScheduleInputs::new(4, 1.0, 1e8, 0.05).with_target(0.4)).unwrap()
        / oracle_complexity_bound(&big_gap).unwrap();
    assert!((r - 2.0).abs() < 1e-6);
}

#[test]
fn descent_rhs_halves_by_root_two() {
    let i = ScheduleInputs::new(5, 1.0, 1.0, 0.1);
    for t in [100u64, 10_000, 1 << 30] {
        let r = descent_bound(&i, 2 * t).unwrap() / descent_bound(&i, t).unwrap();
        assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }
    let rhs = descent_bound(&i, 10_000).unwrap();
    let by_hand = 20.0 * (1.5 * 5f64.powf(1.5) * 11.0 / 1e4).sqrt();
    assert!((rhs - by_hand).abs() < 1e-12 * by_hand);
}

#[test]
fn second_moment_constant() {
    let b = second_moment_bound(3, 2.0);
    assert!((b - 16.0 * (2.0 * std::f64::consts::PI).sqrt() * 12.0).abs() < 1e-12);
}

#[test]
fn caps_flag_and_clamp() {
    let i = ScheduleInputs::new(5, 1.0, 1.0, 0.1).with_target(0.3).with_confidence(0.1);
    let s = schedule_two_phase(&i).unwrap();
    let c = s.capped(&Caps::default());
    assert!(c.horizon_capped && c.batch_capped);
    assert_eq!((c.horizon, c.batch, c.rounds), (1_000_000, 100_000, 5));
    let loose = s.capped(&Caps {
        max_horizon: u64::MAX,
        max_batch: u64::MAX,
    });
    assert!(!loose.horizon_capped && !loose.batch_capped);
    assert_eq!(loose.horizon, s.horizon);
}

#[test]
fn rejects_out_of_range_inputs() {
    assert!(rounds_for(0.0).is_err());
    assert!(rounds_for(1.0).is_err());
    assert!(schedule_two_phase(&ScheduleInputs::new(2, 1.0, 1.0, 0.1).with_target(1.5)).is_err());
    assert!(schedule_eta(&ScheduleInputs::new(2, -1.0, 1.0, 0.1), 10).is_err());
    assert!(schedule_eta(&ScheduleInputs::new(2, 1.0, 1.0, 0.1), 0).is_err());
}

use std::sync::Arc;

use gradfree::optim::{
    run_gfm, run_sgfm, run_two_gfm, run_two_sgfm, schedule_eta, RoundSeeding, RunConfig, ScheduleInputs,
    TwoPhaseConfig,
};
use gradfree::problem::{CountingObjective, CountingStochastic};
use gradfree::problems::{
    make_additive_noise, make_constant, make_finite_sum_pwl, make_norm, make_shifted_norm, Noise,
};
use gradfree::{derive_stream, ProblemSpec, SmoothingParams, StochasticProblemSpec};

fn config(eta: f64, horizon: u64, seed: u64) -> RunConfig {
    RunConfig::new(eta, horizon, SmoothingParams::with_delta(0.1).unwrap(), derive_stream(seed, "opt-test", 0)).unwrap()
}

fn counted(p: &ProblemSpec) -> (ProblemSpec, Arc<CountingObjective>) {
    let c = CountingObjective::new(p.oracle().clone());
    (p.clone().with_oracle(c.clone()), c)
}

fn counted_stochastic(p: &StochasticProblemSpec) -> (StochasticProblemSpec, Arc<CountingStochastic>) {
    let c = CountingStochastic::new(p.oracle().clone());
    (p.clone().with_oracle(c.clone()), c)
}

#[test]
fn gfm_accounting_matches_instrumented_oracle() {
    let (p, c) = counted(&make_norm(4, 1.0).unwrap());
    let cfg = config(1e-3, 777, 1).with_reference_batch(300).with_probes(7, 50);
    let r = run_gfm(&p, &cfg).unwrap();
    assert_eq!(r.oracle_calls, 2 * 777);
    assert_eq!(c.calls(), r.oracle_calls + r.diagnostic_oracle_calls);

    // without diagnostics, only the final value is extra
    let (p, c) = counted(&make_norm(4, 1.0).unwrap());
    let r = run_gfm(&p, &config(1e-3, 500, 1).with_reference_batch(0)).unwrap();
    assert_eq!(c.calls(), r.oracle_calls + r.diagnostic_oracle_calls);
}

#[test]
fn sgfm_accounting_matches_instrumented_oracle() {
    let fs = make_finite_sum_pwl(3, 10, &mut derive_stream(4, "fs", 0)).unwrap();
    let (p, c) = counted_stochastic(&fs.to_stochastic().unwrap());
    let cfg = config(1e-3, 400, 2).with_reference_batch(100).with_probes(3, 20);
    let r = run_sgfm(&p, &cfg).unwrap();
    assert_eq!(r.oracle_calls, 800);
    assert_eq!(c.calls(), r.oracle_calls + r.diagnostic_oracle_calls);
}

#[test]
fn two_phase_accounting_is_s_2t_plus_s_2b() {
    let (s, t, b) = (4u32, 300u64, 250u64);
    let (p, c) = counted(&make_norm(3, 1.0).unwrap());
    let cfg = TwoPhaseConfig::new(config(1e-3, t, 3).with_reference_batch(0), s, b, 0.1, 0.5).unwrap();
    let r = run_two_gfm(&p, &cfg).unwrap();
    assert_eq!(r.total_oracle_calls, s as u64 * 2 * t + s as u64 * 2 * b);
    assert_eq!(c.calls(), r.total_oracle_calls + r.diagnostic_oracle_calls);

    let noisy = make_additive_noise(&make_norm(3, 1.0).unwrap(), Noise::Gaussian { sigma: 0.3 }).unwrap();
    let (p, c) = counted_stochastic(&noisy);
    let cfg = TwoPhaseConfig::new(config(1e-3, t, 3).with_reference_batch(64), s, b, 0.1, 0.5).unwrap();
    let r = run_two_sgfm(&p, &cfg).unwrap();
    assert_eq!(r.total_oracle_calls, s as u64 * 2 * (t + b));
    assert_eq!(c.calls(), r.total_oracle_calls + r.diagnostic_oracle_calls);
}

#[test]
fn single_step_takes_two_calls_and_outputs_start() {
    let (p, c) = counted(&make_norm(2, 1.0).unwrap());
    let r = run_gfm(&p, &config(0.1, 1, 0).with_reference_batch(0)).unwrap();
    assert_eq!((r.oracle_calls, r.output_index), (2, 0));
    assert_eq!(r.output_point, p.initial_point);
    assert_eq!(c.calls(), 3);
}

#[test]
fn constant_function_never_moves() {
    let p = make_constant(6, 2.5).unwrap();
    for seed in 0..5 {
        let r = run_gfm(&p, &config(1.0, 200, seed)).unwrap();
        assert_eq!(r.output_point, p.initial_point);
        assert_eq!(r.stationarity.unwrap().norm, 0.0);
    }
}

#[test]
fn scaled_objective_with_scaled_step_gives_identical_iterates() {
    // alpha a power of two, so every scaling is exact
    let alpha = 4.0;
    let f = make_norm(5, 1.0).unwrap();
    let g = make_norm(5, alpha).unwrap();
    for seed in 0..3 {
        let a = run_gfm(&f, &config(2e-3, 300, seed).with_trajectory(true)).unwrap();
        let b = run_gfm(&g, &config(2e-3 / alpha, 300, seed).with_trajectory(true)).unwrap();
        let xa: Vec<_> = a.trajectory.as_ref().unwrap().iter().map(|p| p.x.clone()).collect();
        let xb: Vec<_> = b.trajectory.as_ref().unwrap().iter().map(|p| p.x.clone()).collect();
        assert_eq!(xa.len(), 300);
        assert_eq!(xa, xb);
        assert_eq!(a.output_point, b.output_point);
    }
}

#[test]
fn sgfm_on_zero_noise_wrapper_equals_gfm() {
    let f = make_norm(4, 1.0).unwrap();
    let zero = StochasticProblemSpec::from_deterministic(&f);
    let cfg = config(1e-3, 500, 9).with_trajectory(true).with_reference_batch(0);
    let a = run_gfm(&f, &cfg).unwrap();
    let b = run_sgfm(&zero, &cfg).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.output_point, b.output_point);
    assert_eq!(a.output_index, b.output_index);
}

#[test]
fn common_token_noise_is_bit_identical_to_deterministic() {
    let f = make_shifted_norm(6, 1.0, 4.0).unwrap();
    let noisy = make_additive_noise(&f, Noise::Dyadic { amplitude: 0.5 }).unwrap();
    let cfg = config(1e-3, 2_000, 5).with_trajectory(true).with_reference_batch(0);
    let a = run_gfm(&f, &cfg).unwrap();
    let b = run_sgfm(&noisy, &cfg).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.output_point, b.output_point);
}

#[test]
fn repeated_runs_are_identical() {
    let fs = make_finite_sum_pwl(4, 12, &mut derive_stream(1, "fs", 0)).unwrap().to_stochastic().unwrap();
    let cfg = config(1e-3, 1_000, 3).with_probes(5, 40);
    let a = serde_json::to_string(&run_sgfm(&fs, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_sgfm(&fs, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn two_phase_selection_matches_rescan() {
    let p = make_norm(3, 1.0).unwrap();
    for seed in 0..4 {
        let cfg = TwoPhaseConfig::new(config(5e-3, 200, seed).with_reference_batch(0), 5, 100, 0.1, 0.5).unwrap();
        let r = run_two_gfm(&p, &cfg).unwrap();
        let mut best = 0;
        for (i, n) in r.phase2_norms.iter().enumerate() {
            if *n < r.phase2_norms[best] {
                best = i;
            }
        }
        assert_eq!(r.selected_index, best);
        assert!(r.phase2_norms.iter().all(|n| r.phase2_norms[r.selected_index] <= *n));
        assert_eq!(r.selected_point, r.candidates[best].output_point);
    }
}

#[test]
fn shared_round_seeds_tie_to_index_zero() {
    let p = make_norm(3, 1.0).unwrap();
    let cfg = TwoPhaseConfig::new(config(5e-3, 200, 1).with_reference_batch(0), 4, 50, 0.1, 0.5)
        .unwrap()
        .with_seeding(RoundSeeding::Shared);
    let r = run_two_gfm(&p, &cfg).unwrap();
    assert!(r.phase2_norms.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(r.selected_index, 0);
}

#[test]
fn scheduled_gfm_on_norm_reaches_threshold() {
    // d = 5, delta = 0.1, gap 1, L = 1, c = 1.5, T = 5e4, 20 seeds; mean <= 0.25
    let p = make_norm(5, 1.0).unwrap();
    let inputs = ScheduleInputs::new(5, 1.0, 1.0, 0.1);
    let eta = schedule_eta(&inputs, 50_000).unwrap();
    let norms: Vec<f64> = (0..20)
        .map(|k| {
            let cfg = config(eta, 50_000, 0)
                .with_seed(derive_stream(k, "gfm-threshold", 0))
                .with_reference_batch(2_000);
            run_gfm(&p, &cfg).unwrap().stationarity.unwrap().norm
        })
        .collect();
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    assert!(mean <= 0.25, "mean stationarity {mean}");
}

#[test]
fn sgfm_stationarity_decreases_in_horizon() {
    let fs = make_finite_sum_pwl(5, 32, &mut derive_stream(8, "fs-monotone", 0)).unwrap();
    let p = fs.to_stochastic().unwrap();
    let mut means = Vec::new();
    for t in [1_000u64, 10_000, 100_000] {
        let s: f64 = (0..20)
            .map(|k| {
                let cfg = config(1e-3, t, 0)
                    .with_seed(derive_stream(k, "sgfm-monotone", 0))
                    .with_reference_batch(2_000);
                run_sgfm(&p, &cfg).unwrap().stationarity.unwrap().norm
            })
            .sum();
        means.push(s / 20.0);
    }
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn non_finite_oracle_aborts_with_step() {
    let p = ProblemSpec::new(
        "blowup",
        gradfree::ProblemMeta::new(1, 1.0, 1.0).unwrap(),
        gradfree::Vector::new(vec![0.0]).unwrap(),
        Arc::new(|x: &[f64]| if x[0] > 0.05 { f64::NAN } else { -x[0] }),
    )
    .unwrap();
    let err = run_gfm(&p, &config(1e-2, 100, 0)).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, gradfree::Error::NonFiniteValue { .. }), "{msg}");
}

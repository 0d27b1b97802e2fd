//! GFM and SGFM: `x <- x - eta g` with two-point estimates, output at a
//! uniformly random iterate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{ProblemSpec, StochasticProblemSpec};
use crate::rng::RngStream;
use crate::sampling::{batch_gradient, raw_estimate, BatchGradient, Evaluator, Scratch, SmoothingParams};
use crate::vector::{norm, Vector};

pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e6;
pub const DEFAULT_REFERENCE_BATCH: usize = 10_000;
pub const DEFAULT_PROBE_BATCH: usize = 2_000;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub eta: f64,
    pub horizon: u64,
    pub smoothing: SmoothingParams,
    pub seed: RngStream,
    pub record_trajectory: bool,
    /// Abort once `|x^t|` exceeds this.
    pub divergence_bound: f64,
    /// Estimates in the stationarity batch at `x^R`; 0 skips it.
    pub reference_batch: usize,
    /// Evenly spaced iterates at which `|grad f_delta|^2` is measured; 0 skips.
    pub probes: usize,
    pub probe_batch: usize,
}

impl RunConfig {
    pub fn new(eta: f64, horizon: u64, smoothing: SmoothingParams, seed: RngStream) -> Result<Self> {
        let c = RunConfig {
            eta,
            horizon,
            smoothing,
            seed,
            record_trajectory: false,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
            reference_batch: DEFAULT_REFERENCE_BATCH,
            probes: 0,
            probe_batch: DEFAULT_PROBE_BATCH,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_trajectory(mut self, on: bool) -> Self {
        self.record_trajectory = on;
        self
    }

    pub fn with_reference_batch(mut self, n: usize) -> Self {
        self.reference_batch = n;
        self
    }

    pub fn with_probes(mut self, probes: usize, batch: usize) -> Self {
        self.probes = probes;
        self.probe_batch = batch;
        self
    }

    pub fn with_divergence_bound(mut self, bound: f64) -> Self {
        self.divergence_bound = bound;
        self
    }

    pub fn with_seed(mut self, seed: RngStream) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(Error::invalid("divergence bound must be positive"));
        }
        if self.probes > 0 && self.probe_batch < 2 {
            return Err(Error::invalid("probe_batch must be >= 2"));
        }
        SmoothingParams::new(self.smoothing.delta, self.smoothing.smoothing_constant)?;
        Ok(())
    }
}

/// `|grad f_delta(x)|` measured by a reference batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    pub norm: f64,
    pub std_error: f64,
    /// Unbiased estimate of `|grad f_delta(x)|^2`.
    pub squared: f64,
    pub n_samples: usize,
}

impl From<&BatchGradient> for Stationarity {
    fn from(b: &BatchGradient) -> Self {
        Stationarity {
            norm: b.norm(),
            std_error: b.norm_std_error(),
            squared: b.squared_norm_unbiased(),
            n_samples: b.n_samples,
        }
    }
}

/// Mean of `|grad f_delta(x^t)|^2` over evenly spaced iterates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryAggregate {
    pub mean_squared: f64,
    pub probe_indices: Vec<u64>,
    pub probe_values: Vec<f64>,
    pub probe_batch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub x: Vector,
    pub estimate_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub output_point: Vector,
    pub output_index: u64,
    /// Oracle calls made by the optimization itself: `2 T`.
    pub oracle_calls: u64,
    /// Calls spent on reporting (final value, reference batch, probes).
    pub diagnostic_oracle_calls: u64,
    pub final_value: f64,
    pub stationarity: Option<Stationarity>,
    pub aggregate: Option<TrajectoryAggregate>,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

fn probe_indices(horizon: u64, probes: usize) -> Vec<u64> {
    let k = (probes as u64).min(horizon);
    let mut v: Vec<u64> = (0..k).map(|i| i * horizon / k).collect();
    v.dedup();
    v
}

pub(crate) fn run_base<E: Evaluator + ?Sized>(ev: &E, x0: &[f64], config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    if x0.len() != ev.dim() {
        return Err(Error::DimensionMismatch {
            expected: ev.dim(),
            found: x0.len(),
        });
    }
    let t_max = config.horizon;
    let delta = config.smoothing.delta;
    let output_index = config.seed.derive("output-index", 0).random_range(0..t_max);
    let mut dirs = config.seed.derive("gfm-steps", 0);
    let mut tokens = config.seed.derive("sgfm-tokens", 0);
    let probes = if config.probes > 0 {
        probe_indices(t_max, config.probes)
    } else {
        Vec::new()
    };
    let mut probe_values = Vec::with_capacity(probes.len());
    let mut next_probe = 0;
    let mut diagnostic: u64 = 0;

    let mut x = x0.to_vec();
    let mut x_out = x.clone();
    let mut scratch = Scratch::new(x.len());
    let mut trajectory = config.record_trajectory.then(Vec::new);

    for t in 0..t_max {
        if next_probe < probes.len() && probes[next_probe] == t {
            let mut r = config.seed.derive("probe-batch", next_probe as u32);
            let b = batch_gradient(ev, &x, delta, config.probe_batch, &mut r, 1.0).map_err(|e| e.at_step(t))?;
            diagnostic += 2 * config.probe_batch as u64;
            probe_values.push(b.squared_norm_unbiased());
            next_probe += 1;
        }
        if t == output_index {
            x_out.copy_from_slice(&x);
        }
        let raw = raw_estimate(ev, &x, delta, &mut dirs, Some(&mut tokens), &mut scratch).map_err(|e| e.at_step(t))?;
        let coef = raw.coefficient;
        if let Some(traj) = trajectory.as_mut() {
            traj.push(TrajectoryPoint {
                t,
                x: Vector::from_vec_unchecked(x.clone()),
                estimate_norm: coef.abs() * norm(&scratch.w),
            });
        }
        for (xi, wi) in x.iter_mut().zip(&scratch.w) {
            *xi -= config.eta * coef * wi;
        }
        let n = norm(&x);
        if !n.is_finite() || n > config.divergence_bound {
            return Err(Error::Diverged {
                step: t + 1,
                norm: n,
                bound: config.divergence_bound,
                point: x,
            });
        }
    }

    let mut value_rng = config.seed.derive("final-value", 0);
    let (final_value, value_calls) = ev.objective_value(&x_out, &mut value_rng, config.reference_batch);
    diagnostic += value_calls;
    let stationarity = if config.reference_batch > 0 {
        let mut r = config.seed.derive("reference-batch", 0);
        let b = batch_gradient(ev, &x_out, delta, config.reference_batch, &mut r, 1.0)?;
        diagnostic += 2 * config.reference_batch as u64;
        Some(Stationarity::from(&b))
    } else {
        None
    };
    let aggregate = (!probes.is_empty()).then(|| TrajectoryAggregate {
        mean_squared: probe_values.iter().sum::<f64>() / probe_values.len() as f64,
        probe_indices: probes,
        probe_values,
        probe_batch: config.probe_batch,
    });

    Ok(RunReport {
        output_point: Vector::from_vec_unchecked(x_out),
        output_index,
        oracle_calls: 2 * t_max,
        diagnostic_oracle_calls: diagnostic,
        final_value,
        stationarity,
        aggregate,
        trajectory,
    })
}

/// Gradient-free method on a value oracle.
pub fn run_gfm(problem: &ProblemSpec, config: &RunConfig) -> Result<RunReport> {
    run_base(problem, problem.initial_point.as_slice(), config)
}

/// Stochastic gradient-free method: each step draws one token used for both
/// evaluations. Tokens come from their own substream, so directions match
/// `run_gfm` under the same seed.
pub fn run_sgfm(problem: &StochasticProblemSpec, config: &RunConfig) -> Result<RunReport> {
    run_base(problem, problem.initial_point.as_slice(), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_constant, make_norm};
    use crate::rng::derive_stream;
    use std::sync::Arc;

    fn cfg(eta: f64, t: u64, seed: u64) -> RunConfig {
        RunConfig::new(eta, t, SmoothingParams::with_delta(0.1).unwrap(), derive_stream(seed, "gfm-run", 0))
            .unwrap()
            .with_reference_batch(0)
    }

    #[test]
    fn constant_stays_put() {
        let p = make_constant(3, 2.0).unwrap().with_initial_point(Vector::new(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let r = run_gfm(&p, &cfg(0.5, 100, 1)).unwrap();
        assert_eq!(r.output_point, p.initial_point);
        assert_eq!(r.final_value, 2.0);
    }

    #[test]
    fn single_step() {
        let p = make_norm(4, 1.0).unwrap();
        let r = run_gfm(&p, &cfg(0.01, 1, 2)).unwrap();
        assert_eq!(r.output_index, 0);
        assert_eq!(r.oracle_calls, 2);
        assert_eq!(r.output_point, p.initial_point);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = make_norm(5, 1.0).unwrap();
        let c = cfg(0.01, 500, 3).with_reference_batch(100).with_probes(5, 50);
        let a = run_gfm(&p, &c).unwrap();
        let b = run_gfm(&p, &c).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let other = run_gfm(&p, &cfg(0.01, 500, 4)).unwrap();
        assert_ne!(a.output_point, other.output_point);
    }

    #[test]
    fn divergence_guard() {
        let p = make_norm(3, 1.0).unwrap();
        let c = cfg(1e9, 10, 5);
        match run_gfm(&p, &c) {
            Err(Error::Diverged { step, bound, .. }) => {
                assert_eq!(step, 1);
                assert_eq!(bound, DEFAULT_DIVERGENCE_BOUND);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn nan_oracle_reports_step() {
        let p = make_norm(2, 1.0)
            .unwrap()
            .with_oracle(Arc::new(|x: &[f64]| if x[0] < 0.1 { f64::NAN } else { x[0].abs() + x[1].abs() }));
        let err = run_gfm(&p, &cfg(0.05, 10_000, 6)).unwrap_err();
        match err {
            Error::NonFiniteValue { step, .. } => assert!(step < 10_000),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trajectory_recorded() {
        let p = make_norm(2, 1.0).unwrap();
        let r = run_gfm(&p, &cfg(0.01, 20, 7).with_trajectory(true)).unwrap();
        let traj = r.trajectory.unwrap();
        assert_eq!(traj.len(), 20);
        assert_eq!(traj[0].x, p.initial_point);
        assert_eq!(traj[r.output_index as usize].x, r.output_point);
        // |g| <= d L per draw
        assert!(traj.iter().all(|pt| pt.estimate_norm <= 2.0 + 1e-12));
    }

    #[test]
    fn probe_spacing() {
        assert_eq!(probe_indices(10, 5), vec![0, 2, 4, 6, 8]);
        assert_eq!(probe_indices(3, 10), vec![0, 1, 2]);
    }
}

//! Two-phase methods: S independent base runs from the same start, then a
//! fresh batch estimate per candidate and the minimal-norm pick.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::gfm::{run_base, RunConfig, RunReport, Stationarity};
use crate::problem::{ProblemSpec, StochasticProblemSpec};
use crate::sampling::{batch_gradient, Evaluator};
use crate::vector::Vector;

/// How rounds get their substreams. `Shared` gives every round (and every
/// phase-2 batch) the same streams; it exists to test the tie-break rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundSeeding {
    #[default]
    Independent,
    Shared,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoPhaseConfig {
    /// Candidates are run without reference batch or probes; those settings
    /// apply to the selected point only.
    pub base: RunConfig,
    pub rounds: u32,
    pub batch: u64,
    pub confidence: f64,
    pub target: f64,
    pub seeding: RoundSeeding,
}

impl TwoPhaseConfig {
    pub fn new(base: RunConfig, rounds: u32, batch: u64, confidence: f64, target: f64) -> Result<Self> {
        let c = TwoPhaseConfig {
            base,
            rounds,
            batch,
            confidence,
            target,
            seeding: RoundSeeding::Independent,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_seeding(mut self, seeding: RoundSeeding) -> Self {
        self.seeding = seeding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.rounds == 0 {
            return Err(Error::invalid("rounds must be >= 1"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("batch must be >= 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid("confidence must be in (0, 1)"));
        }
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::invalid("target must be in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseReport {
    pub candidates: Vec<RunReport>,
    pub phase2_norms: Vec<f64>,
    pub selected_index: usize,
    pub selected_point: Vector,
    /// `S 2T + S 2B`.
    pub total_oracle_calls: u64,
    pub diagnostic_oracle_calls: u64,
    /// Reference-batch measurement at the selected point.
    pub stationarity: Option<Stationarity>,
}

/// Index of the smallest entry; ties go to the lowest index.
pub fn argmin_lowest(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if !(*v < values[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

fn run_two_phase_with<E: Evaluator + ?Sized>(ev: &E, x0: &[f64], config: &TwoPhaseConfig) -> Result<TwoPhaseReport> {
    config.validate()?;
    let stream_index = |s: u32| match config.seeding {
        RoundSeeding::Independent => s,
        RoundSeeding::Shared => 0,
    };
    let candidates: Vec<Result<RunReport>> = (0..config.rounds)
        .into_par_iter()
        .map(|s| {
            let mut base = config.base.clone().with_reference_batch(0).with_probes(0, 2).with_trajectory(false);
            base.seed = config.base.seed.derive("round", stream_index(s));
            run_base(ev, x0, &base)
        })
        .collect();
    // a failed round aborts the whole procedure
    let candidates = candidates.into_iter().collect::<Result<Vec<_>>>()?;

    let delta = config.base.smoothing.delta;
    let norms: Vec<Result<f64>> = candidates
        .par_iter()
        .enumerate()
        .map(|(s, c)| {
            let mut r = config.base.seed.derive("phase2-batch", stream_index(s as u32));
            batch_gradient(ev, &c.output_point, delta, config.batch as usize, &mut r, 1.0).map(|b| b.norm())
        })
        .collect();
    let phase2_norms = norms.into_iter().collect::<Result<Vec<_>>>()?;
    let selected_index = argmin_lowest(&phase2_norms).expect("rounds >= 1");
    let selected_point = candidates[selected_index].output_point.clone();

    let s = config.rounds as u64;
    let mut diagnostic: u64 = candidates.iter().map(|c| c.diagnostic_oracle_calls).sum();
    let stationarity = if config.base.reference_batch > 0 {
        let mut r = config.base.seed.derive("reference-batch", 0);
        let b = batch_gradient(ev, &selected_point, delta, config.base.reference_batch, &mut r, 1.0)?;
        diagnostic += 2 * config.base.reference_batch as u64;
        Some(Stationarity::from(&b))
    } else {
        None
    };
    Ok(TwoPhaseReport {
        total_oracle_calls: s * 2 * config.base.horizon + s * 2 * config.batch,
        diagnostic_oracle_calls: diagnostic,
        candidates,
        phase2_norms,
        selected_index,
        selected_point,
        stationarity,
    })
}

/// Two-phase GFM.
pub fn run_two_gfm(problem: &ProblemSpec, config: &TwoPhaseConfig) -> Result<TwoPhaseReport> {
    run_two_phase_with(problem, problem.initial_point.as_slice(), config)
}

/// Two-phase SGFM; phase-2 estimates draw a fresh token each.
pub fn run_two_sgfm(problem: &StochasticProblemSpec, config: &TwoPhaseConfig) -> Result<TwoPhaseReport> {
    run_two_phase_with(problem, problem.initial_point.as_slice(), config)
}

//! Optimizers and their parameter schedules.

pub mod gfm;
pub mod schedule;
pub mod two_phase;

pub use gfm::{run_gfm, run_sgfm, RunConfig, RunReport, Stationarity, TrajectoryAggregate, TrajectoryPoint};
pub use schedule::{
    descent_bound, oracle_complexity_bound, rounds_for, schedule_eta, schedule_two_phase, second_moment_bound,
    CappedSchedule, Caps, ScheduleInputs, TwoPhaseSchedule,
};
pub use two_phase::{argmin_lowest, run_two_gfm, run_two_sgfm, RoundSeeding, TwoPhaseConfig, TwoPhaseReport};

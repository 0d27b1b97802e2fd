//! Two-phase GFM with a capped schedule: S independent rounds from the same
//! start, then B fresh estimates per candidate and an argmin.

use gradfree::optim::{run_two_gfm, schedule_eta, schedule_two_phase, Caps, RunConfig, ScheduleInputs, TwoPhaseConfig};
use gradfree::problems::make_norm;
use gradfree::{derive_stream, SmoothingParams};

fn main() -> gradfree::Result<()> {
    let problem = make_norm(3, 1.0)?;
    let inputs = ScheduleInputs::new(3, 1.0, problem.meta.value_gap, 0.1)
        .with_target(0.5)
        .with_confidence(0.1);
    let full = schedule_two_phase(&inputs)?;
    let capped = full.capped(&Caps {
        max_horizon: 20_000,
        max_batch: 5_000,
    });
    println!(
        "schedule T = {:.3e}, S = {}, B = {:.3e}; running T = {}, B = {}",
        full.horizon_exact, full.rounds, full.batch_exact, capped.horizon, capped.batch
    );

    let eta = schedule_eta(&inputs, capped.horizon)?;
    let base = RunConfig::new(eta, capped.horizon, SmoothingParams::with_delta(0.1)?, derive_stream(3, "two-phase", 0))?
        .with_reference_batch(20_000);
    let cfg = TwoPhaseConfig::new(base, capped.rounds, capped.batch, 0.1, 0.5)?;
    let report = run_two_gfm(&problem, &cfg)?;

    for (s, (c, n)) in report.candidates.iter().zip(&report.phase2_norms).enumerate() {
        let mark = if s == report.selected_index { "*" } else { " " };
        println!("{mark} round {s}: R = {:>6}, phase-2 |g| = {:.4e}", c.output_index, n);
    }
    println!("oracle calls {}", report.total_oracle_calls);
    if let Some(st) = report.stationarity {
        println!("selected |grad f_delta| = {:.4e} (target 0.5)", st.norm);
    }
    Ok(())
}

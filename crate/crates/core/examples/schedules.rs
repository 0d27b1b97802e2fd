//! Step sizes, horizons and batch sizes from the complexity schedules.

use gradfree::optim::{
    descent_bound, oracle_complexity_bound, rounds_for, schedule_eta, schedule_two_phase, second_moment_bound,
    ScheduleInputs,
};

fn main() -> gradfree::Result<()> {
    println!(
        "{:>4} {:>6} {:>12} {:>12} {:>3} {:>12} {:>12} {:>12}",
        "d", "delta", "T", "eta(T)", "S", "B", "S 2(T+B)", "order"
    );
    for d in [1usize, 10, 100] {
        for delta in [0.1, 0.01] {
            let inputs = ScheduleInputs::new(d, 1.0, 1.0, delta).with_target(0.5).with_confidence(0.1);
            let s = schedule_two_phase(&inputs)?;
            println!(
                "{d:>4} {delta:>6} {:>12.4e} {:>12.4e} {:>3} {:>12.4e} {:>12.4e} {:>12.4e}",
                s.horizon_exact,
                schedule_eta(&inputs, s.horizon)?,
                s.rounds,
                s.batch_exact,
                2.0 * s.rounds as f64 * (s.horizon_exact + s.batch_exact),
                oracle_complexity_bound(&inputs)?
            );
        }
    }

    let inputs = ScheduleInputs::new(5, 1.0, 1.0, 0.1);
    for t in [1_000u64, 100_000, 10_000_000] {
        println!("descent bound at T = {t:>8}: {:.4}", descent_bound(&inputs, t)?);
    }
    println!("E|g|^2 <= {:.3} for d = 5, L = 1", second_moment_bound(5, 1.0));
    for lambda in [0.5, 0.1, 0.01] {
        println!("Lambda = {lambda}: S = {}", rounds_for(lambda)?);
    }
    Ok(())
}

//! Runs the quick Goldstein and moments suites and prints each check.
//! `cargo run --release --example verify_suite -- 1.5` injects an estimator
//! scale fault, which the moments suite should catch.

use gradfree::verify::{run_suite, suite_passed, Fault, Scale, Suite};

fn main() -> gradfree::Result<()> {
    let scale: f64 = std::env::args().nth(1).map(|s| s.parse().expect("scale")).unwrap_or(1.0);
    let fault = Fault { estimator_scale: scale };
    for suite in [Suite::Goldstein, Suite::Moments] {
        let reports = run_suite(suite, 0, Scale::Quick, fault)?;
        for r in &reports {
            println!("{r}");
        }
        println!("{suite:?}: {}\n", if suite_passed(&reports) { "passed" } else { "FAILED" });
    }
    Ok(())
}

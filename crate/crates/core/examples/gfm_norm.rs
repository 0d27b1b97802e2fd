//! GFM on `f(x) = |x|` in eight dimensions.
//!
//! Run with `cargo run --release --example gfm_norm`.

use gradfree::optim::{run_gfm, RunConfig};
use gradfree::problems::make_norm;
use gradfree::{derive_stream, SmoothingParams};

fn main() -> gradfree::Result<()> {
    let problem = make_norm(8, 1.0)?;
    let smoothing = SmoothingParams::with_delta(0.05)?;
    let config = RunConfig::new(2e-3, 5_000, smoothing, derive_stream(7, "example", 0))?
        .with_reference_batch(5_000)
        .with_probes(25, 400);

    let report = run_gfm(&problem, &config)?;
    println!("start value     {:.6}", problem.value(problem.initial_point.as_slice()));
    println!("output index R  {}", report.output_index);
    println!("f(x_R)          {:.6e}", report.final_value);
    println!("oracle calls    {} (+{} diagnostic)", report.oracle_calls, report.diagnostic_oracle_calls);
    if let Some(s) = report.stationarity {
        println!("|grad f_delta(x_R)|  {:.4e} +- {:.1e}", s.norm, s.std_error);
    }
    if let Some(a) = report.aggregate {
        println!("trajectory mean |grad f_delta|^2  {:.4e} over {} probes", a.mean_squared, a.probe_indices.len());
    }
    Ok(())
}

//! SGFM training a small ReLU regression net from a random start.
//! Each step samples one data point as the shared token.

use gradfree::optim::{run_sgfm, RunConfig};
use gradfree::problems::make_relu_net;
use gradfree::{derive_stream, SmoothingParams};

fn main() -> gradfree::Result<()> {
    let data = make_relu_net(&[2, 4, 1], 64, &mut derive_stream(11, "relu-data", 0))?;
    println!(
        "net [2, 4, 1]: {} parameters, {} samples, G = {:.3}",
        data.dim(),
        data.n(),
        data.g_bound()
    );
    let x0 = data.initial_point.clone();
    let problem = data.to_stochastic()?;

    let smoothing = SmoothingParams::with_delta(0.01)?;
    for horizon in [0u64, 2_000, 20_000] {
        if horizon == 0 {
            println!("T = {horizon:>6}: loss {:.5}", data.mean_value(x0.as_slice()));
            continue;
        }
        let cfg = RunConfig::new(5e-4, horizon, smoothing, derive_stream(11, "relu-run", 0))?;
        let report = run_sgfm(&problem, &cfg)?;
        println!(
            "T = {horizon:>6}: loss {:.5} at R = {}",
            data.mean_value(report.output_point.as_slice()),
            report.output_index
        );
    }
    Ok(())
}

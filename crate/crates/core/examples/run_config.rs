//! Drives an experiment from an inline TOML config through the same path
//! as `gradfree run`, without touching the filesystem.

use gradfree::cli::{run_config, ExperimentConfig};

const CONFIG: &str = r#"
algorithm = "sgfm"
seed = 100
n_seeds = 3

[problem]
id = "finite-sum-pwl"
params = { dim = 6, n = 32, instance_seed = 9 }

[schedule]
delta = 0.1
target = 0.5

[caps]
max_horizon = 5000

[report]
reference_batch = 2000
"#;

fn main() -> gradfree::Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG)?;
    let (rows, failure) = run_config(&cfg)?;
    for r in rows {
        println!(
            "seed {} d {} eta {:.3e} T {} (capped: {}) -> f = {:.5}, |grad f_delta| = {:.4}",
            r.seed,
            r.dim,
            r.params.eta,
            r.params.horizon,
            r.params.horizon_capped,
            r.final_value,
            r.stationarity_mean.unwrap_or(f64::NAN)
        );
    }
    if let Some(e) = failure {
        println!("stopped early: {e}");
    }
    Ok(())
}

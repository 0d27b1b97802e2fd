//! Command-line harness: `run`, `verify` and `sweep`.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime abort, 3 verification failure.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::optim::{run_gfm, run_sgfm, run_two_gfm, run_two_sgfm, RunConfig, TwoPhaseConfig};
use crate::problems::{build_problem, AnyProblem};
use crate::rng::derive_stream;
use crate::sampling::SmoothingParams;
use crate::verify::{run_suite, suite_passed, Fault, Scale, Suite};

pub use config::{Algorithm, ExperimentConfig, ResolvedParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

pub const WORKERS_ENV: &str = "GRADFREE_WORKERS";

/// Columns written by `run`, in order.
pub const RUN_COLUMNS: [&str; 15] = [
    "algorithm",
    "problem",
    "d",
    "delta",
    "eta",
    "T",
    "S",
    "B",
    "seed",
    "R",
    "oracle_calls",
    "final_value",
    "stationarity_mean",
    "stationarity_stderr",
    "wall_time_s",
];

/// Extra column written by `sweep` after the run columns: the trajectory
/// average of `|grad f_delta|^2` (empty unless `report.probes > 0`).
pub const AGGREGATE_COLUMN: &str = "aggregate_stationarity_sq";

#[derive(Debug, Parser)]
#[command(name = "gradfree", version, about = "Gradient-free nonsmooth optimization experiments")]
pub struct Cli {
    /// Worker threads (default: number of cores)
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment config; one CSV row per seed
    Run { config: PathBuf },
    /// Run a check suite: moments, smoothing, goldstein, descent, two-phase, all
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Smaller sample sizes
        #[arg(long)]
        quick: bool,
        #[arg(long, hide = true, default_value_t = 1.0)]
        inject_estimator_scale: f64,
    },
    /// Run a config over the cross product of [sweep.grid]
    Sweep { config: PathBuf },
}

/// Error with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(e: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            message: e.to_string(),
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: &Cli) -> std::result::Result<i32, CliError> {
    let workers = match cli.workers {
        Some(0) => return Err(CliError::config("--workers must be >= 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(CliError::runtime)?;
    fs::create_dir_all(&cli.out).map_err(|e| CliError::runtime(format!("{}: {e}", cli.out.display())))?;
    pool.install(|| match &cli.command {
        Command::Run { config } => cmd_run(config, &cli.out),
        Command::Verify {
            suite,
            seed,
            quick,
            inject_estimator_scale,
        } => cmd_verify(suite, *seed, *quick, *inject_estimator_scale, &cli.out),
        Command::Sweep { config } => cmd_sweep(config, &cli.out),
    })
}

fn read_config(path: &Path) -> std::result::Result<(String, ExperimentConfig), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok((text, cfg))
}

fn fmt_real(v: f64) -> String {
    format!("{v:.12e}")
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One finished run.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Row {
    pub algorithm: Algorithm,
    pub problem: String,
    pub dim: usize,
    pub params: ResolvedParams,
    pub seed: u64,
    pub output_index: u64,
    pub oracle_calls: u64,
    pub final_value: f64,
    pub stationarity_mean: Option<f64>,
    pub stationarity_stderr: Option<f64>,
    pub aggregate: Option<f64>,
    pub wall_time_s: f64,
}

impl Row {
    fn run_fields(&self) -> Vec<String> {
        vec![
            self.algorithm.to_string(),
            self.problem.clone(),
            self.dim.to_string(),
            fmt_real(self.params.delta),
            fmt_real(self.params.eta),
            self.params.horizon.to_string(),
            fmt_opt(self.params.rounds),
            fmt_opt(self.params.batch),
            self.seed.to_string(),
            self.output_index.to_string(),
            self.oracle_calls.to_string(),
            fmt_real(self.final_value),
            fmt_opt(self.stationarity_mean.map(fmt_real)),
            fmt_opt(self.stationarity_stderr.map(fmt_real)),
            fmt_real(self.wall_time_s),
        ]
    }
}

/// Runs one seed of a config.
pub fn run_row(cfg: &ExperimentConfig, problem: &AnyProblem, params: &ResolvedParams, seed: u64) -> Result<Row> {
    let start = Instant::now();
    let smoothing = SmoothingParams::new(params.delta, params.smoothing_constant)?;
    let base = RunConfig::new(params.eta, params.horizon, smoothing, derive_stream(seed, "run", 0))?
        .with_reference_batch(cfg.report.reference_batch)
        .with_probes(cfg.report.probes, cfg.report.probe_batch)
        .with_divergence_bound(cfg.report.divergence_bound);
    let (output_index, oracle_calls, final_value, stat, aggregate) = if cfg.algorithm.is_two_phase() {
        let tp = TwoPhaseConfig::new(
            base,
            params.rounds.expect("resolved"),
            params.batch.expect("resolved"),
            params.confidence,
            params.target,
        )?;
        let r = if cfg.algorithm.is_stochastic() {
            run_two_sgfm(&problem.to_stochastic(), &tp)?
        } else {
            run_two_gfm(&problem.to_deterministic()?, &tp)?
        };
        let sel = &r.candidates[r.selected_index];
        (sel.output_index, r.total_oracle_calls, sel.final_value, r.stationarity, None)
    } else {
        let r = if cfg.algorithm.is_stochastic() {
            run_sgfm(&problem.to_stochastic(), &base)?
        } else {
            run_gfm(&problem.to_deterministic()?, &base)?
        };
        (
            r.output_index,
            r.oracle_calls,
            r.final_value,
            r.stationarity,
            r.aggregate.map(|a| a.mean_squared),
        )
    };
    let wall = if cfg.output.record_wall_time {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    Ok(Row {
        algorithm: cfg.algorithm,
        problem: cfg.problem.id.clone(),
        dim: problem.dim(),
        params: params.clone(),
        seed,
        output_index,
        oracle_calls,
        final_value,
        stationarity_mean: stat.map(|s| s.norm),
        stationarity_stderr: stat.map(|s| s.std_error),
        aggregate,
        wall_time_s: wall,
    })
}

/// Runs every seed of a config in parallel; rows come back in seed order.
/// Stops at the first failing seed and returns the rows before it.
pub fn run_config(cfg: &ExperimentConfig) -> Result<(Vec<Row>, Option<Error>)> {
    let problem = build_problem(&cfg.problem.id, &cfg.problem.params)?;
    let params = cfg.resolve(&problem)?;
    if !cfg.algorithm.is_stochastic() {
        problem.to_deterministic()?;
    }
    let results: Vec<Result<Row>> = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|k| run_row(cfg, &problem, &params, cfg.seed.wrapping_add(k)))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => return Ok((rows, Some(e))),
        }
    }
    Ok((rows, None))
}

fn write_file(path: &Path, contents: &str) -> std::result::Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn csv_line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

fn write_incomplete(csv: &mut String, failure: &Option<Error>) {
    if let Some(e) = failure {
        let _ = writeln!(csv, "# incomplete: {}", e.to_string().replace('\n', " "));
    }
}

pub fn cmd_run(config: &Path, out: &Path) -> std::result::Result<i32, CliError> {
    let (_, cfg) = read_config(config)?;
    if cfg.sweep.is_some() {
        return Err(CliError::config("[sweep] is only valid for the sweep command"));
    }
    // problem and schedule errors are config errors, not runtime aborts
    let problem = build_problem(&cfg.problem.id, &cfg.problem.params).map_err(CliError::config)?;
    let params = cfg.resolve(&problem).map_err(CliError::config)?;
    if !cfg.algorithm.is_stochastic() {
        problem.to_deterministic().map_err(CliError::config)?;
    }
    let (rows, failure) = run_config(&cfg).map_err(CliError::runtime)?;

    let mut csv = csv_line(&RUN_COLUMNS.map(String::from));
    for r in &rows {
        csv.push_str(&csv_line(&r.run_fields()));
    }
    write_incomplete(&mut csv, &failure);
    let csv_path = out.join(cfg.output.csv.as_deref().unwrap_or("runs.csv"));
    write_file(&csv_path, &csv)?;
    let json_path = out.join(cfg.output.json.as_deref().unwrap_or("runs.json"));
    let sidecar = json!({
        "config": &cfg,
        "resolved": &params,
        "complete": failure.is_none(),
        "error": failure.as_ref().map(|e| e.to_string()),
        "rows": &rows,
    });
    write_file(&json_path, &(serde_json::to_string_pretty(&sidecar).expect("serializable") + "\n"))?;
    match failure {
        Some(e) => Err(CliError::runtime(format!("run aborted, partial CSV at {}: {e}", csv_path.display()))),
        None => {
            println!("wrote {} rows to {}", rows.len(), csv_path.display());
            Ok(EXIT_OK)
        }
    }
}

pub fn cmd_verify(
    suite: &str,
    seed: u64,
    quick: bool,
    estimator_scale: f64,
    out: &Path,
) -> std::result::Result<i32, CliError> {
    let s: Suite = suite.parse().map_err(CliError::config)?;
    let scale = if quick { Scale::Quick } else { Scale::Full };
    let reports = run_suite(s, seed, scale, Fault { estimator_scale }).map_err(CliError::runtime)?;
    let pass = suite_passed(&reports);
    for r in &reports {
        println!("{r}");
    }
    let doc = json!({
        "suite": suite,
        "seed": seed,
        "scale": scale,
        "pass": pass,
        "reports": reports,
    });
    let path = out.join(format!("verify-{suite}.json"));
    write_file(&path, &(serde_json::to_string_pretty(&doc).expect("serializable") + "\n"))?;
    println!("{} -> {}", if pass { "all checks passed" } else { "verification FAILED" }, path.display());
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY })
}

fn grid_points(grid: &Table) -> std::result::Result<(Vec<String>, Vec<Vec<Value>>), CliError> {
    let mut keys = Vec::new();
    let mut lists = Vec::new();
    for (k, v) in grid {
        match v {
            Value::Array(a) => {
                keys.push(k.clone());
                lists.push(a.clone());
            }
            _ => return Err(CliError::config(format!("sweep.grid.{k} must be an array"))),
        }
    }
    if keys.is_empty() || lists.iter().any(|l| l.is_empty()) {
        return Ok((keys, Vec::new()));
    }
    let mut points: Vec<Vec<Value>> = vec![Vec::new()];
    for list in &lists {
        points = points
            .into_iter()
            .flat_map(|p| {
                list.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    Ok((keys, points))
}

fn grid_count(grid: &Table) -> usize {
    if grid.is_empty() {
        return 0;
    }
    grid.values()
        .map(|v| v.as_array().map(|a| a.len()).unwrap_or(0))
        .try_fold(1usize, |acc, l| acc.checked_mul(l))
        .unwrap_or(usize::MAX)
}

fn fmt_grid_value(v: &Value) -> String {
    match v {
        Value::Float(f) => fmt_real(*f),
        Value::Integer(i) => i.to_string(),
        Value::String(s) => s.clone(),
        Value::Boolean(b) => b.to_string(),
        other => other.to_string(),
    }
}

pub fn cmd_sweep(config: &Path, out: &Path) -> std::result::Result<i32, CliError> {
    let (text, cfg) = read_config(config)?;
    let sweep = cfg.sweep.clone().ok_or_else(|| CliError::config("sweep needs a [sweep] section"))?;
    let count = grid_count(&sweep.grid);
    if count > sweep.max_points {
        return Err(CliError::config(format!(
            "grid has {count} points, above sweep.max_points = {}",
            sweep.max_points
        )));
    }
    let (keys, points) = grid_points(&sweep.grid)?;
    let mut base: Table = text.parse().map_err(CliError::config)?;
    base.remove("sweep");

    // resolve every grid point before running anything
    let mut configs = Vec::with_capacity(points.len());
    for p in &points {
        let mut t = base.clone();
        for (k, v) in keys.iter().zip(p) {
            config::set_path(&mut t, k, v.clone()).map_err(CliError::config)?;
        }
        let c = ExperimentConfig::from_table(t).map_err(|e| CliError::config(format!("grid point {p:?}: {e}")))?;
        let problem = build_problem(&c.problem.id, &c.problem.params).map_err(CliError::config)?;
        c.resolve(&problem).map_err(CliError::config)?;
        configs.push(c);
    }

    let mut header: Vec<String> = keys.clone();
    header.extend(RUN_COLUMNS.iter().map(|s| s.to_string()));
    header.push(AGGREGATE_COLUMN.to_string());
    let mut csv = csv_line(&header);
    let results: Vec<Result<(Vec<Row>, Option<Error>)>> = configs.par_iter().map(run_config).collect();
    let mut failure = None;
    for (p, res) in points.iter().zip(results) {
        let (rows, err) = res.map_err(CliError::runtime)?;
        for r in &rows {
            let mut fields: Vec<String> = p.iter().map(fmt_grid_value).collect();
            fields.extend(r.run_fields());
            fields.push(fmt_opt(r.aggregate.map(fmt_real)));
            csv.push_str(&csv_line(&fields));
        }
        if let Some(e) = err {
            failure = Some(e);
            break;
        }
    }
    write_incomplete(&mut csv, &failure);
    let csv_path = out.join(cfg.output.csv.as_deref().unwrap_or("sweep.csv"));
    write_file(&csv_path, &csv)?;
    let json_path = out.join(cfg.output.json.as_deref().unwrap_or("sweep.json"));
    let sidecar = json!({
        "config": &cfg,
        "grid_keys": keys,
        "grid_points": points.len(),
        "complete": failure.is_none(),
        "error": failure.as_ref().map(|e| e.to_string()),
    });
    write_file(&json_path, &(serde_json::to_string_pretty(&sidecar).expect("serializable") + "\n"))?;
    match failure {
        Some(e) => Err(CliError::runtime(format!("sweep aborted, partial CSV at {}: {e}", csv_path.display()))),
        None => {
            println!("wrote {} grid points to {}", points.len(), csv_path.display());
            Ok(EXIT_OK)
        }
    }
}

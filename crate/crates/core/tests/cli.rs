use std::fs;
use std::path::Path;
use std::process::Command;

use gradfree::cli::{AGGREGATE_COLUMN, RUN_COLUMNS};
use gradfree::optim::{schedule_eta, ScheduleInputs};

const BIN: &str = env!("CARGO_BIN_EXE_gradfree");

fn gradfree(out: &Path, args: &[&str]) -> (i32, String, String) {
    let o = Command::new(BIN)
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("GRADFREE_WORKERS")
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8(o.stdout).unwrap(),
        String::from_utf8(o.stderr).unwrap(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const CONSTANT: &str = r#"
algorithm = "gfm"
seed = 5
n_seeds = 2

[problem]
id = "constant"
params = { dim = 3, value = 1.5 }

[explicit]
eta = 0.01
horizon = 50
delta = 0.25

[report]
reference_batch = 100

[output]
csv = "constant.csv"
json = "constant.json"
record_wall_time = false
"#;

#[test]
fn golden_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONSTANT);
    let (code, _, err) = gradfree(dir.path(), &["run", &cfg]);
    assert_eq!(code, 0, "{err}");
    let got = fs::read_to_string(dir.path().join("constant.csv")).unwrap();
    assert_eq!(got, include_str!("data/golden_constant.csv"));
    assert_eq!(got.lines().next().unwrap(), RUN_COLUMNS.join(","));
    assert!(got.ends_with('\n'));
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("constant.json")).unwrap()).unwrap();
    assert_eq!(sidecar["complete"], true);
    assert_eq!(sidecar["config"]["problem"]["id"], "constant");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "r.toml",
        r#"
algorithm = "2sgfm"
n_seeds = 3
[problem]
id = "finite-sum-pwl"
params = { dim = 3, n = 8 }
[explicit]
eta = 1e-3
horizon = 300
delta = 0.1
rounds = 3
batch = 200
[report]
reference_batch = 500
[output]
record_wall_time = false
"#,
    );
    assert_eq!(gradfree(dir.path(), &["run", &cfg]).0, 0);
    let a = fs::read(dir.path().join("runs.csv")).unwrap();
    let aj = fs::read(dir.path().join("runs.json")).unwrap();
    assert_eq!(gradfree(dir.path(), &["--workers", "3", "run", &cfg]).0, 0);
    assert_eq!(a, fs::read(dir.path().join("runs.csv")).unwrap());
    assert_eq!(aj, fs::read(dir.path().join("runs.json")).unwrap());

    assert_eq!(gradfree(dir.path(), &["verify", "goldstein", "--seed", "4"]).0, 0);
    let v = fs::read(dir.path().join("verify-goldstein.json")).unwrap();
    assert_eq!(gradfree(dir.path(), &["verify", "goldstein", "--seed", "4"]).0, 0);
    assert_eq!(v, fs::read(dir.path().join("verify-goldstein.json")).unwrap());
}

#[test]
fn constant_problem_rows_are_stationary_for_every_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    for alg in ["gfm", "sgfm", "2gfm", "2sgfm"] {
        let extra = if alg.starts_with('2') { "rounds = 2\nbatch = 10\n" } else { "" };
        let text = CONSTANT
            .replace("\"gfm\"", &format!("\"{alg}\""))
            .replace("delta = 0.25\n", &format!("delta = 0.25\n{extra}"));
        let cfg = write(dir.path(), "c.toml", &text);
        assert_eq!(gradfree(dir.path(), &["run", &cfg]).0, 0, "{alg}");
        let csv = fs::read_to_string(dir.path().join("constant.csv")).unwrap();
        for line in csv.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f[0], alg);
            assert_eq!(f[12].parse::<f64>().unwrap(), 0.0);
            assert_eq!(f[6].is_empty(), !alg.starts_with('2'));
        }
    }
}

#[test]
fn schedule_block_emits_schedule_eta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        r#"
algorithm = "gfm"
[problem]
id = "norm"
params = { dim = 4 }
[schedule]
delta = 0.1
target = 0.5
horizon = 5000
[report]
reference_batch = 0
[output]
record_wall_time = false
"#,
    );
    assert_eq!(gradfree(dir.path(), &["run", &cfg]).0, 0);
    let csv = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let want = schedule_eta(&ScheduleInputs::new(4, 1.0, 1.0, 0.1), 5000).unwrap();
    assert_eq!(row[4], format!("{want:.12e}"));
    assert_eq!(row[5], "5000");
    assert_eq!(row[13], "");
}

#[test]
fn config_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "algorithm = \"gfm\"\n[problem]\nid = \"norm\"\nbogus = 1\n");
    let (code, _, err) = gradfree(dir.path(), &["run", &bad]);
    assert_eq!(code, 1);
    assert!(err.contains("line 4") && err.contains("bogus"), "{err}");

    let both = write(
        dir.path(),
        "both.toml",
        "algorithm = \"gfm\"\n[problem]\nid = \"norm\"\n[explicit]\neta = 1.0\nhorizon = 1\ndelta = 0.1\n[schedule]\ndelta = 0.1\ntarget = 0.5\n",
    );
    assert_eq!(gradfree(dir.path(), &["run", &both]).0, 1);
    let unknown = write(dir.path(), "u.toml", &CONSTANT.replace("\"constant\"", "\"nope\""));
    assert_eq!(gradfree(dir.path(), &["run", &unknown]).0, 1);
    assert_eq!(gradfree(dir.path(), &["run", "/does/not/exist.toml"]).0, 1);
    assert_eq!(gradfree(dir.path(), &["verify", "nonsense"]).0, 1);
    assert_eq!(gradfree(dir.path(), &["frobnicate"]).0, 1);
    assert_eq!(gradfree(dir.path(), &["--workers", "0", "verify", "goldstein"]).0, 1);
}

#[test]
fn runtime_abort_exits_two_with_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.toml",
        r#"
algorithm = "gfm"
n_seeds = 2
[problem]
id = "norm"
params = { dim = 2 }
[explicit]
eta = 10.0
horizon = 1000
delta = 0.1
[report]
divergence_bound = 5.0
[output]
record_wall_time = false
"#,
    );
    let (code, _, err) = gradfree(dir.path(), &["run", &cfg]);
    assert_eq!(code, 2, "{err}");
    let csv = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert!(csv.starts_with(&RUN_COLUMNS.join(",")));
    assert!(csv.lines().last().unwrap().starts_with("# incomplete:"), "{csv}");
    let sidecar = fs::read_to_string(dir.path().join("runs.json")).unwrap();
    assert!(sidecar.contains("\"complete\": false"));
}

#[test]
fn injected_estimator_fault_fails_moments_with_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = gradfree(dir.path(), &["verify", "moments", "--quick", "--inject-estimator-scale", "1.5"]);
    assert_eq!(code, 3);
    assert!(out.contains("FAIL unbiasedness"));
    let j: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify-moments.json")).unwrap()).unwrap();
    assert_eq!(j["pass"], false);
    assert!(j["reports"].as_array().unwrap().len() > 5);
}

#[test]
fn goldstein_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = gradfree(dir.path(), &["verify", "goldstein"]);
    assert_eq!(code, 0);
    assert_eq!(out.matches("PASS goldstein-membership").count(), 5);
}

const SWEEP: &str = r#"
algorithm = "gfm"
n_seeds = 2
[problem]
id = "norm"
params = { dim = 3 }
[explicit]
eta = 1e-3
horizon = 200
delta = 0.1
[report]
reference_batch = 100
probes = 4
probe_batch = 50
[output]
record_wall_time = false
"#;

#[test]
fn sweep_grid_over_dimension_fills_d_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &format!("{SWEEP}[sweep]\ngrid = {{ \"problem.params.dim\" = [2, 8], \"explicit.horizon\" = [100, 200] }}\n"),
    );
    assert_eq!(gradfree(dir.path(), &["sweep", &cfg]).0, 0);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 2 + RUN_COLUMNS.len() + 1);
    assert_eq!(header[0], "explicit.horizon");
    assert_eq!(header[1], "problem.params.dim");
    assert_eq!(*header.last().unwrap(), AGGREGATE_COLUMN);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 2 * 2);
    let d_col = header.iter().position(|h| *h == "d").unwrap();
    let t_col = header.iter().position(|h| *h == "T").unwrap();
    for r in &rows {
        assert_eq!(r[1], r[d_col]);
        assert_eq!(r[0], r[t_col]);
        assert!(!r.last().unwrap().is_empty());
    }
    assert_eq!(rows.iter().filter(|r| r[d_col] == "8").count(), 4);
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    for grid in ["grid = {}", "grid = { \"explicit.horizon\" = [] }"] {
        let cfg = write(dir.path(), "e.toml", &format!("{SWEEP}[sweep]\n{grid}\n"));
        assert_eq!(gradfree(dir.path(), &["sweep", &cfg]).0, 0);
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1, "{csv}");
        assert!(csv.ends_with(&format!("{AGGREGATE_COLUMN}\n")));
    }
}

#[test]
fn sweep_over_cap_is_refused_with_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{SWEEP}[sweep]\nmax_points = 5\ngrid = {{ \"explicit.horizon\" = [1, 2, 3], \"explicit.delta\" = [0.1, 0.2] }}\n"),
    );
    let (code, _, err) = gradfree(dir.path(), &["sweep", &cfg]);
    assert_eq!(code, 1);
    assert!(err.contains("6 points"), "{err}");
    assert!(!dir.path().join("sweep.csv").exists());
}

#[test]
fn worker_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["--out", dir.path().to_str().unwrap(), "verify", "goldstein"])
        .env("GRADFREE_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

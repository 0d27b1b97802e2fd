//! Experiment configuration (TOML).
//!
//! ```toml
//! algorithm = "gfm"        # gfm | sgfm | 2gfm | 2sgfm
//! seed = 42                # row k uses seed + k
//! n_seeds = 5
//!
//! [problem]
//! id = "norm"
//! params = { dim = 5 }
//!
//! [schedule]               # or [explicit], never both
//! delta = 0.1
//! target = 0.3
//! confidence = 0.1
//!
//! [caps]
//! max_horizon = 1000000
//! max_batch = 100000
//!
//! [report]
//! reference_batch = 10000
//! probes = 0
//!
//! [output]
//! csv = "runs.csv"
//! record_wall_time = true
//!
//! [sweep]                  # sweep only
//! max_points = 1000
//! grid = { "schedule.horizon" = [1000, 4000, 16000] }
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::optim::gfm::{DEFAULT_DIVERGENCE_BOUND, DEFAULT_PROBE_BATCH, DEFAULT_REFERENCE_BATCH};
use crate::optim::schedule::{schedule_eta, schedule_two_phase, Caps, ScheduleInputs};
use crate::problems::AnyProblem;
use crate::sampling::DEFAULT_SMOOTHING_CONSTANT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "gfm")]
    Gfm,
    #[serde(rename = "sgfm")]
    Sgfm,
    #[serde(rename = "2gfm")]
    TwoGfm,
    #[serde(rename = "2sgfm")]
    TwoSgfm,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Gfm => "gfm",
            Algorithm::Sgfm => "sgfm",
            Algorithm::TwoGfm => "2gfm",
            Algorithm::TwoSgfm => "2sgfm",
        }
    }

    pub fn is_two_phase(&self) -> bool {
        matches!(self, Algorithm::TwoGfm | Algorithm::TwoSgfm)
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Algorithm::Sgfm | Algorithm::TwoSgfm)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub id: String,
    #[serde(default)]
    pub params: Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitParams {
    pub eta: f64,
    pub horizon: u64,
    pub delta: f64,
    pub smoothing_constant: Option<f64>,
    pub rounds: Option<u32>,
    pub batch: Option<u64>,
    pub confidence: Option<f64>,
    pub target: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub delta: f64,
    pub target: f64,
    pub confidence: Option<f64>,
    pub smoothing_constant: Option<f64>,
    /// Defaults to the problem's declared L (or G).
    pub lipschitz: Option<f64>,
    /// Defaults to the problem's declared gap.
    pub value_gap: Option<f64>,
    /// Single-phase only: use this T instead of the scheduled one.
    pub horizon: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapsSection {
    pub max_horizon: u64,
    pub max_batch: u64,
}

impl Default for CapsSection {
    fn default() -> Self {
        let c = Caps::default();
        CapsSection {
            max_horizon: c.max_horizon,
            max_batch: c.max_batch,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub reference_batch: usize,
    pub probes: usize,
    pub probe_batch: usize,
    pub divergence_bound: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            reference_batch: DEFAULT_REFERENCE_BATCH,
            probes: 0,
            probe_batch: DEFAULT_PROBE_BATCH,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub csv: Option<String>,
    pub json: Option<String>,
    /// When false the wall_time_s column is written as 0 so reruns are byte-identical.
    pub record_wall_time: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            csv: None,
            json: None,
            record_wall_time: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    #[serde(default)]
    pub grid: Table,
}

fn default_max_points() -> usize {
    1000
}

fn default_n_seeds() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub problem: ProblemSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: u64,
    pub explicit: Option<ExplicitParams>,
    pub schedule: Option<ScheduleParams>,
    #[serde(default)]
    pub caps: CapsSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default)]
    pub output: OutputSection,
    pub sweep: Option<SweepSection>,
}

/// Parameters a run actually uses after schedules and caps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub eta: f64,
    pub horizon: u64,
    pub delta: f64,
    pub smoothing_constant: f64,
    pub rounds: Option<u32>,
    pub batch: Option<u64>,
    pub confidence: f64,
    pub target: f64,
    pub horizon_capped: bool,
    pub batch_capped: bool,
}

impl ExperimentConfig {
    /// Parses and validates; parse errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_table(table: Table) -> Result<Self> {
        let cfg: ExperimentConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.explicit, &self.schedule) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid("config: give exactly one of [explicit] and [schedule], not both"))
            }
            (None, None) => return Err(Error::invalid("config: one of [explicit] or [schedule] is required")),
            _ => {}
        }
        if self.n_seeds == 0 {
            return Err(Error::invalid("config: n_seeds must be >= 1"));
        }
        if let Some(e) = &self.explicit {
            if self.algorithm.is_two_phase() && (e.rounds.is_none() || e.batch.is_none()) {
                return Err(Error::invalid(format!(
                    "config: [explicit] needs rounds and batch for algorithm '{}'",
                    self.algorithm
                )));
            }
            if !self.algorithm.is_two_phase() && (e.rounds.is_some() || e.batch.is_some()) {
                return Err(Error::invalid(format!(
                    "config: rounds/batch only apply to two-phase algorithms, not '{}'",
                    self.algorithm
                )));
            }
        }
        if let Some(s) = &self.schedule {
            if self.algorithm.is_two_phase() && s.horizon.is_some() {
                return Err(Error::invalid("config: [schedule] horizon override is for single-phase runs only"));
            }
        }
        if self.caps.max_horizon == 0 || self.caps.max_batch == 0 {
            return Err(Error::invalid("config: caps must be >= 1"));
        }
        if self.report.probes > 0 && self.report.probe_batch < 2 {
            return Err(Error::invalid("config: report.probe_batch must be >= 2"));
        }
        Ok(())
    }

    pub fn caps(&self) -> Caps {
        Caps {
            max_horizon: self.caps.max_horizon,
            max_batch: self.caps.max_batch,
        }
    }

    /// Applies schedules and caps against the built problem's metadata.
    pub fn resolve(&self, problem: &AnyProblem) -> Result<ResolvedParams> {
        if let Some(e) = &self.explicit {
            return Ok(ResolvedParams {
                eta: e.eta,
                horizon: e.horizon,
                delta: e.delta,
                smoothing_constant: e.smoothing_constant.unwrap_or(DEFAULT_SMOOTHING_CONSTANT),
                rounds: e.rounds,
                batch: e.batch,
                confidence: e.confidence.unwrap_or(0.1),
                target: e.target.unwrap_or(0.5),
                horizon_capped: false,
                batch_capped: false,
            });
        }
        let s = self.schedule.as_ref().expect("validated");
        let meta = problem.meta();
        let inputs = ScheduleInputs {
            dim: meta.dim,
            lipschitz: s.lipschitz.unwrap_or(meta.lipschitz),
            value_gap: s.value_gap.unwrap_or(meta.value_gap),
            delta: s.delta,
            target: s.target,
            confidence: s.confidence.unwrap_or(0.1),
            smoothing_constant: s.smoothing_constant.unwrap_or(DEFAULT_SMOOTHING_CONSTANT),
        };
        let caps = self.caps();
        let (horizon, rounds, batch, horizon_capped, batch_capped) = match (self.algorithm.is_two_phase(), s.horizon) {
            (false, Some(t)) => (t, None, None, false, false),
            (two, _) => {
                let c = schedule_two_phase(&inputs)?.capped(&caps);
                if two {
                    (c.horizon, Some(c.rounds), Some(c.batch), c.horizon_capped, c.batch_capped)
                } else {
                    (c.horizon, None, None, c.horizon_capped, false)
                }
            }
        };
        Ok(ResolvedParams {
            eta: schedule_eta(&inputs, horizon)?,
            horizon,
            delta: inputs.delta,
            smoothing_constant: inputs.smoothing_constant,
            rounds,
            batch,
            confidence: inputs.confidence,
            target: inputs.target,
            horizon_capped,
            batch_capped,
        })
    }
}

/// Sets `value` at a dotted path such as `schedule.horizon` or
/// `problem.params.dim`, creating intermediate tables.
pub fn set_path(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::invalid(format!("bad grid key '{path}'")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::invalid(format!("grid key '{path}': '{p}' is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
algorithm = "gfm"
seed = 7
[problem]
id = "norm"
params = { dim = 4 }
[explicit]
eta = 0.01
horizon = 100
delta = 0.1
"#;

    #[test]
    fn parses_minimal() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(c.algorithm, Algorithm::Gfm);
        assert_eq!(c.n_seeds, 1);
        assert!(c.output.record_wall_time);
    }

    #[test]
    fn unknown_key_has_line() {
        let text = BASE.replace("horizon = 100", "horizn = 100");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        assert!(err.contains("horizn"), "{err}");
    }

    #[test]
    fn both_blocks_rejected() {
        let text = format!("{BASE}\n[schedule]\ndelta = 0.1\ntarget = 0.3\n");
        assert!(ExperimentConfig::parse(&text).is_err());
        let none = BASE.split("[explicit]").next().unwrap();
        assert!(ExperimentConfig::parse(none).is_err());
    }

    #[test]
    fn two_phase_explicit_needs_rounds() {
        let text = BASE.replace("\"gfm\"", "\"2gfm\"");
        assert!(ExperimentConfig::parse(&text).is_err());
        let ok = format!("{text}rounds = 2\nbatch = 10\n");
        assert!(ExperimentConfig::parse(&ok).is_ok());
    }

    #[test]
    fn set_path_nested() {
        let mut t: Table = BASE.parse().unwrap();
        set_path(&mut t, "problem.params.dim", Value::Integer(8)).unwrap();
        set_path(&mut t, "explicit.horizon", Value::Integer(5)).unwrap();
        let c = ExperimentConfig::from_table(t).unwrap();
        assert_eq!(c.problem.params["dim"].as_integer(), Some(8));
        assert_eq!(c.explicit.unwrap().horizon, 5);
        let mut t: Table = BASE.parse().unwrap();
        assert!(set_path(&mut t, "seed.x", Value::Integer(1)).is_err());
    }
}

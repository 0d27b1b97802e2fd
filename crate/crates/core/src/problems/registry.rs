//! Problems addressable by string id plus a parameter table.

use std::collections::BTreeSet;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::problem::{ProblemSpec, SampleToken, StochasticProblemSpec};
use crate::problems::{finite_sum, geometric, pwl, relu};
use crate::rng::{derive_stream, RngStream};
use crate::sampling::Evaluator;
use crate::vector::Vector;

/// Either a value oracle or a noisy value oracle.
#[derive(Clone, Debug)]
pub enum AnyProblem {
    Deterministic(ProblemSpec),
    Stochastic(StochasticProblemSpec),
}

impl AnyProblem {
    pub fn name(&self) -> &str {
        match self {
            AnyProblem::Deterministic(p) => &p.name,
            AnyProblem::Stochastic(p) => &p.name,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyProblem::Deterministic(p) => p.dim(),
            AnyProblem::Stochastic(p) => p.dim(),
        }
    }

    pub fn meta(&self) -> &crate::problem::ProblemMeta {
        match self {
            AnyProblem::Deterministic(p) => &p.meta,
            AnyProblem::Stochastic(p) => &p.meta,
        }
    }

    pub fn initial_point(&self) -> &Vector {
        match self {
            AnyProblem::Deterministic(p) => &p.initial_point,
            AnyProblem::Stochastic(p) => &p.initial_point,
        }
    }

    pub fn reference_smoothed_gradient(&self, x: &[f64], delta: f64) -> Option<Vec<f64>> {
        match self {
            AnyProblem::Deterministic(p) => p.reference_smoothed_gradient(x, delta),
            AnyProblem::Stochastic(p) => p.reference_smoothed_gradient(x, delta),
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, AnyProblem::Stochastic(_))
    }

    /// Stochastic view; deterministic problems get the zero-noise wrapper.
    pub fn to_stochastic(&self) -> StochasticProblemSpec {
        match self {
            AnyProblem::Deterministic(p) => StochasticProblemSpec::from_deterministic(p),
            AnyProblem::Stochastic(p) => p.clone(),
        }
    }

    /// Deterministic view; stochastic problems need a mean oracle.
    pub fn to_deterministic(&self) -> Result<ProblemSpec> {
        match self {
            AnyProblem::Deterministic(p) => Ok(p.clone()),
            AnyProblem::Stochastic(p) => p
                .mean_problem()
                .ok_or_else(|| Error::invalid(format!("problem '{}' has no mean oracle", p.name))),
        }
    }
}

impl Evaluator for AnyProblem {
    fn dim(&self) -> usize {
        AnyProblem::dim(self)
    }

    fn pair(&self, plus: &[f64], minus: &[f64], tokens: &mut RngStream) -> (f64, f64, Option<SampleToken>) {
        match self {
            AnyProblem::Deterministic(p) => p.pair(plus, minus, tokens),
            AnyProblem::Stochastic(p) => p.pair(plus, minus, tokens),
        }
    }

    fn objective_value(&self, x: &[f64], tokens: &mut RngStream, n: usize) -> (f64, u64) {
        match self {
            AnyProblem::Deterministic(p) => p.objective_value(x, tokens, n),
            AnyProblem::Stochastic(p) => p.objective_value(x, tokens, n),
        }
    }
}

pub const PROBLEM_IDS: &[&str] = &[
    "norm",
    "shifted-norm",
    "halfspace",
    "tight-mixture",
    "linear",
    "constant",
    "abs",
    "pwl1d",
    "w-shape",
    "hinge",
    "skewed-v",
    "finite-sum-linear",
    "finite-sum-pwl",
    "relu-net",
];

// accepted by every problem
const COMMON: &[&str] = &["x0", "value_gap", "noise", "noise_scale"];

struct Params<'a> {
    id: &'a str,
    table: &'a Table,
}

impl<'a> Params<'a> {
    fn allow(&self, keys: &[&str]) -> Result<()> {
        let allowed: BTreeSet<&str> = keys.iter().chain(COMMON).copied().collect();
        for k in self.table.keys() {
            if !allowed.contains(k.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown parameter '{k}' for problem '{}' (accepted: {})",
                    self.id,
                    allowed.iter().copied().collect::<Vec<_>>().join(", ")
                )));
            }
        }
        Ok(())
    }

    fn bad(&self, key: &str, want: &str) -> Error {
        Error::invalid(format!("problem '{}': parameter '{key}' must be {want}", self.id))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.table.get(key) {
            None => Ok(default),
            Some(Value::Float(v)) => Ok(*v),
            Some(Value::Integer(v)) => Ok(*v as f64),
            Some(_) => Err(self.bad(key, "a number")),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.table.get(key) {
            None => Ok(default),
            Some(Value::Integer(v)) if *v >= 0 => Ok(*v as u64),
            Some(_) => Err(self.bad(key, "a non-negative integer")),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.u64_or(key, default as u64).map(|v| v as usize)
    }

    fn vec(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.bad(key, "an array of numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.bad(key, "an array of numbers")),
        }
    }

    fn usizes(&self, key: &str) -> Result<Option<Vec<usize>>> {
        Ok(self
            .vec(key)?
            .map(|v| v.into_iter().map(|x| x as usize).collect()))
    }

    fn matrix(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(rows)) => rows
                .iter()
                .map(|r| match r {
                    Value::Array(_) => {
                        let mut t = Table::new();
                        t.insert("row".into(), r.clone());
                        Params { id: self.id, table: &t }
                            .vec("row")
                            .map(|v| v.unwrap_or_default())
                            .map_err(|_| self.bad(key, "an array of number arrays"))
                    }
                    _ => Err(self.bad(key, "an array of number arrays")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.bad(key, "an array of number arrays")),
        }
    }

    fn str_or(&self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.table.get(key) {
            None => Ok(default),
            Some(Value::String(s)) => Ok(s.as_str()),
            Some(_) => Err(self.bad(key, "a string")),
        }
    }
}

fn direction(p: &Params, dim: usize) -> Result<Vec<f64>> {
    Ok(p.vec("w")?.unwrap_or_else(|| vec![1.0; dim]))
}

/// Builds a problem by id. Every problem accepts `x0` (start override),
/// `value_gap` (gap override) and `noise` = "dyadic" | "gaussian" with
/// `noise_scale`, which turns a deterministic problem into `f(x) + b(xi)`.
pub fn build_problem(id: &str, table: &Table) -> Result<AnyProblem> {
    let p = Params { id, table };
    let det = |spec: ProblemSpec| AnyProblem::Deterministic(spec);
    let mut problem = match id {
        "norm" => {
            p.allow(&["dim", "lipschitz", "x0_radius"])?;
            det(geometric::make_norm_from(
                p.usize_or("dim", 5)?,
                p.f64_or("lipschitz", 1.0)?,
                p.f64_or("x0_radius", geometric::NORM_START_RADIUS)?,
            )?)
        }
        "shifted-norm" => {
            p.allow(&["dim", "lipschitz", "offset"])?;
            det(geometric::make_shifted_norm(
                p.usize_or("dim", 5)?,
                p.f64_or("lipschitz", 1.0)?,
                p.f64_or("offset", 4.0)?,
            )?)
        }
        "halfspace" | "tight-mixture" => {
            p.allow(&["dim", "lipschitz", "w"])?;
            let dim = p.usize_or("dim", 5)?;
            let l = p.f64_or("lipschitz", 1.0)?;
            let w = direction(&p, dim)?;
            if id == "halfspace" {
                det(geometric::make_halfspace_distance(dim, l, &w)?)
            } else {
                det(geometric::make_tight_mixture(dim, l, &w)?)
            }
        }
        "linear" => {
            p.allow(&["a", "b", "dim"])?;
            let a = match p.vec("a")? {
                Some(a) => a,
                None => {
                    let mut a = vec![0.0; p.usize_or("dim", 2)?];
                    if let Some(first) = a.first_mut() {
                        *first = 1.0;
                    }
                    a
                }
            };
            det(geometric::make_linear(&a, p.f64_or("b", 0.0)?)?)
        }
        "constant" => {
            p.allow(&["dim", "value"])?;
            det(geometric::make_constant(p.usize_or("dim", 2)?, p.f64_or("value", 0.0)?)?)
        }
        "abs" => {
            p.allow(&["lipschitz"])?;
            det(geometric::make_abs_1d(p.f64_or("lipschitz", 1.0)?)?)
        }
        "pwl1d" => {
            p.allow(&["breakpoints", "slopes", "anchor"])?;
            let bps = p.vec("breakpoints")?.ok_or_else(|| p.bad("breakpoints", "given"))?;
            let slopes = p.vec("slopes")?.ok_or_else(|| p.bad("slopes", "given"))?;
            det(pwl::make_pwl_1d(bps, slopes, p.f64_or("anchor", 0.0)?)?)
        }
        "w-shape" | "hinge" | "skewed-v" => {
            p.allow(&[])?;
            let f = match id {
                "w-shape" => pwl::w_shape(),
                "hinge" => pwl::hinge(),
                _ => pwl::skewed_v(),
            };
            det(pwl::pwl_problem(id, f)?)
        }
        "finite-sum-linear" => {
            p.allow(&["coefs", "offsets"])?;
            let coefs = p.matrix("coefs")?.ok_or_else(|| p.bad("coefs", "given"))?;
            let offsets = p.vec("offsets")?.unwrap_or_else(|| vec![0.0; coefs.len()]);
            AnyProblem::Stochastic(finite_sum::make_finite_sum_linear(coefs, offsets)?.to_stochastic()?)
        }
        "finite-sum-pwl" => {
            p.allow(&["dim", "n", "instance_seed"])?;
            let mut rng = derive_stream(p.u64_or("instance_seed", 0)?, "problem-instance", 0);
            let fs = finite_sum::make_finite_sum_pwl(p.usize_or("dim", 5)?, p.usize_or("n", 16)?, &mut rng)?;
            AnyProblem::Stochastic(fs.to_stochastic()?)
        }
        "relu-net" => {
            p.allow(&["layers", "dataset_size", "instance_seed"])?;
            let layers = p.usizes("layers")?.unwrap_or_else(|| vec![2, 4, 1]);
            let mut rng = derive_stream(p.u64_or("instance_seed", 0)?, "problem-instance", 0);
            let fs = relu::make_relu_net(&layers, p.usize_or("dataset_size", 32)?, &mut rng)?;
            AnyProblem::Stochastic(fs.to_stochastic()?)
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown problem '{other}' (known: {})",
                PROBLEM_IDS.join(", ")
            )))
        }
    };

    if let Some(x0) = p.vec("x0")? {
        let x0 = Vector::new(x0)?;
        problem = match problem {
            AnyProblem::Deterministic(s) => AnyProblem::Deterministic(s.with_initial_point(x0)?),
            AnyProblem::Stochastic(s) => AnyProblem::Stochastic(s.with_initial_point(x0)?),
        };
    }
    if table.contains_key("value_gap") {
        let gap = p.f64_or("value_gap", 0.0)?;
        problem = match problem {
            AnyProblem::Deterministic(s) => AnyProblem::Deterministic(s.with_value_gap(gap)?),
            AnyProblem::Stochastic(s) => AnyProblem::Stochastic(s.with_value_gap(gap)?),
        };
    }
    if let Some(kind) = table.get("noise").map(|_| p.str_or("noise", "")).transpose()? {
        let scale = p.f64_or("noise_scale", 0.5)?;
        let noise = match kind {
            "dyadic" => geometric::Noise::Dyadic { amplitude: scale },
            "gaussian" => geometric::Noise::Gaussian { sigma: scale },
            _ => return Err(p.bad("noise", "\"dyadic\" or \"gaussian\"")),
        };
        problem = match problem {
            AnyProblem::Deterministic(s) => AnyProblem::Stochastic(geometric::make_additive_noise(&s, noise)?),
            AnyProblem::Stochastic(_) => {
                return Err(Error::invalid(format!("problem '{id}' is already stochastic; 'noise' not allowed")))
            }
        };
    }
    Ok(problem)
}

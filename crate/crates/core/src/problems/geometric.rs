//! Norm, halfspace-distance and their mixture, plus linear, constant and
//! additive-noise helpers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{
    ProblemMeta, ProblemSpec, SampleSpace, SampleToken, StochasticObjective, StochasticProblemSpec,
};
use crate::problems::pwl::{self, PiecewiseLinear1D};
use crate::quadrature::ball_marginal_cdf;
use crate::vector::{dot, norm, Vector};

/// Distance of the default start from the origin for `make_norm`.
pub const NORM_START_RADIUS: f64 = 0.2;

fn check_lipschitz(l: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid(format!("lipschitz must be positive, got {l}")));
    }
    Ok(())
}

fn unit(w: &[f64]) -> Result<Vec<f64>> {
    let n = norm(w);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::invalid("w must be a nonzero finite vector"));
    }
    Ok(w.iter().map(|v| v / n).collect())
}

/// `f(x) = L |x|`, starting on the diagonal at distance `NORM_START_RADIUS`.
/// The declared gap `L` bounds the true gap `0.2 L`.
pub fn make_norm(dim: usize, lipschitz: f64) -> Result<ProblemSpec> {
    make_norm_from(dim, lipschitz, NORM_START_RADIUS)
}

/// `make_norm` with the start at distance `start_radius` from the origin.
pub fn make_norm_from(dim: usize, lipschitz: f64, start_radius: f64) -> Result<ProblemSpec> {
    check_lipschitz(lipschitz)?;
    if !(start_radius >= 0.0 && start_radius.is_finite()) {
        return Err(Error::invalid("start radius must be finite and >= 0"));
    }
    let meta = ProblemMeta::new(dim, lipschitz, lipschitz.max(lipschitz * start_radius))?.with_known_optimum(0.0);
    let x0 = Vector::filled(dim, start_radius / (dim as f64).sqrt())?;
    let l = lipschitz;
    let mut spec = ProblemSpec::new("norm", meta, x0, Arc::new(move |x: &[f64]| l * norm(x)))?
        .with_exact_gradient(Arc::new(move |x: &[f64]| {
            let n = norm(x);
            if n == 0.0 {
                vec![0.0; x.len()]
            } else {
                x.iter().map(|v| l * v / n).collect()
            }
        }));
    if dim == 1 {
        let abs = PiecewiseLinear1D::new(vec![0.0], vec![-l, l], 0.0)?;
        let s = abs.clone();
        spec = spec
            .with_smoothed_gradient(Arc::new(move |x: &[f64], d| vec![s.smoothed_gradient(x[0], d)]))
            .with_goldstein(abs);
    }
    Ok(spec)
}

/// `d/ds E|s + delta u_1|` for u uniform on the unit ball in R^dim.
pub(crate) fn smoothed_abs_slope(dim: usize, s: f64, delta: f64) -> f64 {
    1.0 - 2.0 * ball_marginal_cdf(dim, -s / delta)
}

/// `f(x) = L |<x, w/|w|> - 1/2|`, starting at the origin (`f = L/2 = gap`).
pub fn make_halfspace_distance(dim: usize, lipschitz: f64, w: &[f64]) -> Result<ProblemSpec> {
    check_lipschitz(lipschitz)?;
    if w.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: w.len(),
        });
    }
    let w_hat = unit(w)?;
    let meta = ProblemMeta::new(dim, lipschitz, lipschitz / 2.0)?.with_known_optimum(0.0);
    let l = lipschitz;
    let (wf, wg, ws) = (w_hat.clone(), w_hat.clone(), w_hat);
    Ok(ProblemSpec::new(
        "halfspace",
        meta,
        Vector::zeros(dim)?,
        Arc::new(move |x: &[f64]| l * (dot(x, &wf) - 0.5).abs()),
    )?
    .with_exact_gradient(Arc::new(move |x: &[f64]| {
        let s = (dot(x, &wg) - 0.5).signum();
        wg.iter().map(|v| l * s * v).collect()
    }))
    .with_smoothed_gradient(Arc::new(move |x: &[f64], delta| {
        let slope = l * smoothed_abs_slope(ws.len(), dot(x, &ws) - 0.5, delta);
        ws.iter().map(|v| slope * v).collect()
    })))
}

/// `f = (L |x| + L |<x, w/|w|> - 1/2|) / 2`, starting at `-w/|w|`.
/// `f(x0) = 5L/4` and `inf f = L/4`, so the declared gap `L` is exact.
pub fn make_tight_mixture(dim: usize, lipschitz: f64, w: &[f64]) -> Result<ProblemSpec> {
    check_lipschitz(lipschitz)?;
    if w.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: w.len(),
        });
    }
    let w_hat = unit(w)?;
    let meta = ProblemMeta::new(dim, lipschitz, lipschitz)?.with_known_optimum(lipschitz / 4.0);
    let x0 = Vector::new(w_hat.iter().map(|v| -v).collect())?;
    let l = lipschitz;
    let (wf, wg) = (w_hat.clone(), w_hat);
    Ok(ProblemSpec::new(
        "tight-mixture",
        meta,
        x0,
        Arc::new(move |x: &[f64]| 0.5 * (l * norm(x) + l * (dot(x, &wf) - 0.5).abs())),
    )?
    .with_exact_gradient(Arc::new(move |x: &[f64]| {
        let n = norm(x);
        let s = (dot(x, &wg) - 0.5).signum();
        x.iter()
            .zip(&wg)
            .map(|(xi, wi)| 0.5 * l * (if n == 0.0 { 0.0 } else { xi / n } + s * wi))
            .collect()
    })))
}

/// `f(x) = <a, x> + b`. Unbounded below, so the declared gap is the nominal `|a|`.
pub fn make_linear(a: &[f64], b: f64) -> Result<ProblemSpec> {
    let a = Vector::new(a.to_vec())?;
    let l = a.norm();
    if l == 0.0 {
        return Err(Error::invalid("linear coefficient must be nonzero; use make_constant"));
    }
    let dim = a.dim();
    let meta = ProblemMeta::new(dim, l, l)?;
    let slope0 = a[0];
    let (af, ag, as_) = (a.clone(), a.clone(), a);
    let mut spec = ProblemSpec::new("linear", meta, Vector::zeros(dim)?, Arc::new(move |x: &[f64]| dot(&af, x) + b))?
        .with_exact_gradient(Arc::new(move |_: &[f64]| ag.to_vec()))
        .with_smoothed_gradient(Arc::new(move |_: &[f64], _| as_.to_vec()));
    if dim == 1 {
        spec = spec.with_goldstein(PiecewiseLinear1D::new(vec![], vec![slope0], b)?);
    }
    Ok(spec)
}

/// `f(x) = value`. Lipschitz metadata must be positive, so `L` is declared as 1.
pub fn make_constant(dim: usize, value: f64) -> Result<ProblemSpec> {
    if !value.is_finite() {
        return Err(Error::invalid("constant must be finite"));
    }
    let meta = ProblemMeta::new(dim, 1.0, 1.0)?.with_known_optimum(value);
    Ok(ProblemSpec::new("constant", meta, Vector::zeros(dim)?, Arc::new(move |_: &[f64]| value))?
        .with_exact_gradient(Arc::new(move |x: &[f64]| vec![0.0; x.len()]))
        .with_smoothed_gradient(Arc::new(move |x: &[f64], _| vec![0.0; x.len()])))
}

/// 1-D `|x|` with the start at 0.5 (gap exactly 0.5 L).
pub fn make_abs_1d(lipschitz: f64) -> Result<ProblemSpec> {
    check_lipschitz(lipschitz)?;
    let p = PiecewiseLinear1D::new(vec![0.0], vec![-lipschitz, lipschitz], 0.0)?;
    let spec = pwl::pwl_problem("abs", p)?;
    spec.with_initial_point(Vector::new(vec![0.5])?)?
        .with_value_gap(0.5 * lipschitz)
}

/// Point-independent zero-mean noise `b(xi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Noise {
    /// `amplitude (k - 512) / 512` with k uniform in `0..=1024`. Every value
    /// is a dyadic multiple of `amplitude / 512`.
    Dyadic { amplitude: f64 },
    /// `sigma z` with z standard normal, built from the token bits.
    Gaussian { sigma: f64 },
}

pub const DYADIC_LEVELS: u64 = 1025;

impl Noise {
    pub fn sample(&self, token: SampleToken) -> f64 {
        match *self {
            Noise::Dyadic { amplitude } => {
                amplitude * ((token.0 % DYADIC_LEVELS) as f64 - 512.0) / 512.0
            }
            Noise::Gaussian { sigma } => {
                // Box-Muller on the two 32-bit halves
                let u1 = ((token.0 >> 32) as f64 + 0.5) / 4294967296.0;
                let u2 = ((token.0 & 0xffff_ffff) as f64 + 0.5) / 4294967296.0;
                sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            }
        }
    }

    fn sample_space(&self) -> SampleSpace {
        match self {
            Noise::Dyadic { .. } => SampleSpace::FiniteUniform {
                n: DYADIC_LEVELS as usize,
            },
            Noise::Gaussian { .. } => SampleSpace::Continuous {
                description: "standard normal via Box-Muller on token bits".into(),
            },
        }
    }
}

struct AdditiveNoise {
    base: Arc<dyn crate::problem::Objective>,
    noise: Noise,
}

impl StochasticObjective for AdditiveNoise {
    fn sample_space(&self) -> SampleSpace {
        self.noise.sample_space()
    }

    fn value(&self, x: &[f64], token: SampleToken) -> f64 {
        self.base.value(x) + self.noise.sample(token)
    }

    fn mean_value(&self, x: &[f64]) -> Option<f64> {
        Some(self.base.value(x))
    }
}

/// `F(x, xi) = f(x) + b(xi)`. Each `F(., xi)` is L-Lipschitz, so `G = L`.
pub fn make_additive_noise(problem: &ProblemSpec, noise: Noise) -> Result<StochasticProblemSpec> {
    let scale = match noise {
        Noise::Dyadic { amplitude } => amplitude,
        Noise::Gaussian { sigma } => sigma,
    };
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::invalid("noise scale must be finite and >= 0"));
    }
    let base = StochasticProblemSpec::from_deterministic(problem);
    Ok(base.with_oracle(Arc::new(AdditiveNoise {
        base: problem.oracle().clone(),
        noise,
    })))
}

/// `f(x) = offset + L |x|`. With `offset = 4`, `L = 1` and inputs of norm
/// below 1, every value lies in `[4, 5)` where sums with dyadic noise of
/// amplitude 1/2 are exact, so common-token noise cancels bit for bit.
pub fn make_shifted_norm(dim: usize, lipschitz: f64, offset: f64) -> Result<ProblemSpec> {
    if !offset.is_finite() {
        return Err(Error::invalid("offset must be finite"));
    }
    let base = make_norm(dim, lipschitz)?;
    let l = lipschitz;
    let meta = base.meta.clone().with_known_optimum(offset);
    let x0 = base.initial_point.clone();
    Ok(
        ProblemSpec::new("shifted-norm", meta, x0, Arc::new(move |x: &[f64]| offset + l * norm(x)))?
            .with_exact_gradient(Arc::new(move |x: &[f64]| {
                let n = norm(x);
                x.iter().map(|v| if n == 0.0 { 0.0 } else { l * v / n }).collect()
            })),
    )
}

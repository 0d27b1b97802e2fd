//! Sphere/ball sampling, the symmetric two-point gradient estimator and
//! Monte-Carlo estimates of the ball-smoothed function
//! `f_delta(x) = E_u[f(x + delta u)]`, u uniform on the unit ball.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{ProblemSpec, SampleToken, StochasticProblemSpec};
use crate::rng::RngStream;
use crate::vector::{norm, Vector};

/// Default for the constant c in the `c L sqrt(d) / delta` gradient-Lipschitz
/// bound of `f_delta`. The best constant tends to sqrt(pi/2) ~ 1.2533.
pub const DEFAULT_SMOOTHING_CONSTANT: f64 = 1.5;

/// Estimates per parallel work unit in batch estimates.
const BATCH_CHUNK: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub delta: f64,
    pub smoothing_constant: f64,
}

impl SmoothingParams {
    pub fn new(delta: f64, smoothing_constant: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive, got {delta}")));
        }
        if !(smoothing_constant > 0.0 && smoothing_constant.is_finite()) {
            return Err(Error::invalid(format!(
                "smoothing constant must be positive, got {smoothing_constant}"
            )));
        }
        Ok(SmoothingParams {
            delta,
            smoothing_constant,
        })
    }

    pub fn with_delta(delta: f64) -> Result<Self> {
        SmoothingParams::new(delta, DEFAULT_SMOOTHING_CONSTANT)
    }
}

/// One draw of `g = d/(2 delta) (F(x + delta w) - F(x - delta w)) w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub direction: Vector,
    pub value_plus: f64,
    pub value_minus: f64,
    pub estimate: Vector,
    pub token: Option<SampleToken>,
    pub oracle_calls: u32,
}

/// Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Average of independent two-point estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchGradient {
    pub mean: Vector,
    pub std_error: Vec<f64>,
    pub n_samples: usize,
    /// Sum over coordinates of the per-draw sample variance.
    pub trace_variance: f64,
}

impl BatchGradient {
    pub fn norm(&self) -> f64 {
        self.mean.norm()
    }

    /// Delta-method standard error of `norm()`.
    pub fn norm_std_error(&self) -> f64 {
        let n = self.norm();
        if n == 0.0 {
            return self.std_error.iter().map(|s| s * s).sum::<f64>().sqrt();
        }
        self.mean
            .iter()
            .zip(&self.std_error)
            .map(|(m, s)| (m / n * s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Unbiased estimate of `|E g|^2`: `|mean|^2 - tr(S) / n`.
    pub fn squared_norm_unbiased(&self) -> f64 {
        let m = self.mean.norm();
        if self.n_samples < 2 {
            return m * m;
        }
        m * m - self.trace_variance / self.n_samples as f64
    }
}

/// Uniform draw on the unit sphere in R^dim (Gaussian direction, normalized).
pub fn sample_unit_sphere(dim: usize, rng: &mut RngStream) -> Result<Vector> {
    if dim == 0 {
        return Err(Error::invalid("dim must be >= 1"));
    }
    let mut w = vec![0.0; dim];
    fill_unit_sphere(&mut w, rng);
    Ok(Vector::from_vec_unchecked(w))
}

/// Uniform draw in the closed unit ball: `r^(1/d) w` with w on the sphere.
pub fn sample_unit_ball(dim: usize, rng: &mut RngStream) -> Result<Vector> {
    if dim == 0 {
        return Err(Error::invalid("dim must be >= 1"));
    }
    let mut u = vec![0.0; dim];
    fill_unit_ball(&mut u, rng);
    Ok(Vector::from_vec_unchecked(u))
}

pub(crate) fn fill_unit_sphere(w: &mut [f64], rng: &mut RngStream) {
    loop {
        for v in w.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = norm(w);
        // near-zero draws are redrawn
        if n >= 1e-12 && n.is_finite() {
            for v in w.iter_mut() {
                *v /= n;
            }
            return;
        }
    }
}

pub(crate) fn fill_unit_ball(u: &mut [f64], rng: &mut RngStream) {
    fill_unit_sphere(u, rng);
    let r: f64 = rng.random::<f64>().powf(1.0 / u.len() as f64);
    for v in u.iter_mut() {
        *v *= r;
    }
}

/// Uniform access to deterministic and noisy oracles for the estimators and
/// the optimizers.
pub(crate) trait Evaluator: Sync {
    fn dim(&self) -> usize;

    /// `(F(plus, xi), F(minus, xi))` for one token. Deterministic problems
    /// ignore `tokens` and report no token.
    fn pair(
        &self,
        plus: &[f64],
        minus: &[f64],
        tokens: &mut RngStream,
    ) -> (f64, f64, Option<SampleToken>);

    /// `f(x)` for reporting, with the number of oracle calls spent. Noisy
    /// problems without a mean oracle average `n` fresh draws.
    fn objective_value(&self, x: &[f64], tokens: &mut RngStream, n: usize) -> (f64, u64);
}

impl Evaluator for ProblemSpec {
    fn dim(&self) -> usize {
        self.meta.dim
    }

    fn pair(&self, plus: &[f64], minus: &[f64], _tokens: &mut RngStream) -> (f64, f64, Option<SampleToken>) {
        (self.value(plus), self.value(minus), None)
    }

    fn objective_value(&self, x: &[f64], _tokens: &mut RngStream, _n: usize) -> (f64, u64) {
        (self.value(x), 1)
    }
}

impl Evaluator for StochasticProblemSpec {
    fn dim(&self) -> usize {
        self.meta.dim
    }

    fn pair(&self, plus: &[f64], minus: &[f64], tokens: &mut RngStream) -> (f64, f64, Option<SampleToken>) {
        let xi = self.draw(tokens);
        (self.value(plus, xi), self.value(minus, xi), Some(xi))
    }

    fn objective_value(&self, x: &[f64], tokens: &mut RngStream, n: usize) -> (f64, u64) {
        if let Some(v) = self.mean_value(x) {
            return (v, 0);
        }
        let n = n.max(1);
        let mut acc = 0.0;
        for _ in 0..n {
            let xi = self.draw(tokens);
            acc += self.value(x, xi);
        }
        (acc / n as f64, n as u64)
    }
}

/// Buffers reused across estimates.
pub(crate) struct Scratch {
    pub w: Vec<f64>,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        Scratch {
            w: vec![0.0; dim],
            plus: vec![0.0; dim],
            minus: vec![0.0; dim],
        }
    }
}

pub(crate) struct RawEstimate {
    /// g = coefficient * w
    pub coefficient: f64,
    pub value_plus: f64,
    pub value_minus: f64,
    pub token: Option<SampleToken>,
}

/// Draws w into `scratch.w` and evaluates the two-point coefficient. When
/// `tokens` is `None` the sample token is drawn from `dirs` after w.
pub(crate) fn raw_estimate<E: Evaluator + ?Sized>(
    ev: &E,
    x: &[f64],
    delta: f64,
    dirs: &mut RngStream,
    tokens: Option<&mut RngStream>,
    scratch: &mut Scratch,
) -> Result<RawEstimate> {
    fill_unit_sphere(&mut scratch.w, dirs);
    for (((p, m), xi), wi) in scratch.plus.iter_mut().zip(scratch.minus.iter_mut()).zip(x).zip(&scratch.w) {
        *p = xi + delta * wi;
        *m = xi - delta * wi;
    }
    let (fp, fm, token) = match tokens {
        Some(t) => ev.pair(&scratch.plus, &scratch.minus, t),
        None => ev.pair(&scratch.plus, &scratch.minus, dirs),
    };
    for (v, at) in [(fp, &scratch.plus), (fm, &scratch.minus)] {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                step: 0,
                point: at.clone(),
                value: v,
            });
        }
    }
    let d = x.len() as f64;
    Ok(RawEstimate {
        coefficient: d / (2.0 * delta) * (fp - fm),
        value_plus: fp,
        value_minus: fm,
        token,
    })
}

fn single_estimate<E: Evaluator + ?Sized>(
    ev: &E,
    x: &[f64],
    params: &SmoothingParams,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    check_point(ev.dim(), x)?;
    let mut scratch = Scratch::new(x.len());
    let raw = raw_estimate(ev, x, params.delta, rng, None, &mut scratch)?;
    let estimate: Vec<f64> = scratch.w.iter().map(|w| raw.coefficient * w).collect();
    Ok(GradientEstimate {
        direction: Vector::from_vec_unchecked(scratch.w),
        value_plus: raw.value_plus,
        value_minus: raw.value_minus,
        estimate: Vector::from_vec_unchecked(estimate),
        token: raw.token,
        oracle_calls: 2,
    })
}

pub fn two_point_estimate(
    problem: &ProblemSpec,
    x: &[f64],
    params: &SmoothingParams,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    single_estimate(problem, x, params, rng)
}

/// Draws w, then one token xi shared by both evaluations.
pub fn two_point_estimate_stochastic(
    problem: &StochasticProblemSpec,
    x: &[f64],
    params: &SmoothingParams,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    single_estimate(problem, x, params, rng)
}

fn check_point(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("evaluation point has non-finite entries"));
    }
    Ok(())
}

/// Streaming per-coordinate mean and sum of squared deviations.
#[derive(Clone, Debug)]
pub(crate) struct Moments {
    pub n: usize,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Moments {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push_scaled(&mut self, scale: f64, dir: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((mean, m2), di) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(dir) {
            let v = scale * di;
            let d = v - *mean;
            *mean += d / n;
            *m2 += d * (v - *mean);
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
    }

    pub fn variance(&self, i: usize) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2[i] / (self.n - 1) as f64
        }
    }
}

/// Splits `n` draws into chunks: chunk 0 continues `rng`, chunk k >= 1 uses
/// `rng.derive(label, k)`. Chunk results are merged in index order.
pub(crate) fn chunked<T, F>(n: usize, rng: &mut RngStream, label: &str, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut RngStream) -> Result<T> + Sync,
{
    let chunks = n.div_ceil(BATCH_CHUNK).max(1);
    let first = work(n.min(BATCH_CHUNK), rng)?;
    let parent = rng.clone();
    let rest: Vec<Result<T>> = (1..chunks)
        .into_par_iter()
        .map(|k| {
            let len = (n - k * BATCH_CHUNK).min(BATCH_CHUNK);
            let mut sub = parent.derive(label, k as u32);
            work(len, &mut sub)
        })
        .collect();
    let mut out = Vec::with_capacity(chunks);
    out.push(first);
    for r in rest {
        out.push(r?);
    }
    Ok(out)
}

pub(crate) fn batch_gradient<E: Evaluator + ?Sized>(
    ev: &E,
    x: &[f64],
    delta: f64,
    n_samples: usize,
    rng: &mut RngStream,
    scale: f64,
) -> Result<BatchGradient> {
    check_point(ev.dim(), x)?;
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    let dim = x.len();
    let parts = chunked(n_samples, rng, "batch-chunk", |len, r| {
        let mut m = Moments::new(dim);
        let mut scratch = Scratch::new(dim);
        for _ in 0..len {
            let raw = raw_estimate(ev, x, delta, r, None, &mut scratch)?;
            m.push_scaled(scale * raw.coefficient, &scratch.w);
        }
        Ok(m)
    })?;
    let mut total = Moments::new(dim);
    for p in &parts {
        total.merge(p);
    }
    let n = total.n as f64;
    let std_error: Vec<f64> = (0..dim).map(|i| (total.variance(i) / n).sqrt()).collect();
    let trace_variance = (0..dim).map(|i| total.variance(i)).sum();
    Ok(BatchGradient {
        mean: Vector::from_vec_unchecked(total.mean),
        std_error,
        n_samples,
        trace_variance,
    })
}

/// Monte-Carlo mean of `|g|^2` over `n_samples` two-point estimates.
pub(crate) fn second_moment<E: Evaluator + ?Sized>(
    ev: &E,
    x: &[f64],
    delta: f64,
    n_samples: usize,
    rng: &mut RngStream,
    scale: f64,
) -> Result<McEstimate> {
    check_point(ev.dim(), x)?;
    if n_samples < 2 {
        return Err(Error::invalid("second moment needs n_samples >= 2"));
    }
    let dim = x.len();
    let parts = chunked(n_samples, rng, "moment-chunk", |len, r| {
        let mut m = Moments::new(1);
        let mut scratch = Scratch::new(dim);
        for _ in 0..len {
            let raw = raw_estimate(ev, x, delta, r, None, &mut scratch)?;
            let c = scale * raw.coefficient;
            m.push_scaled(c * c * norm(&scratch.w).powi(2), &[1.0]);
        }
        Ok(m)
    })?;
    let mut total = Moments::new(1);
    for p in &parts {
        total.merge(p);
    }
    Ok(McEstimate {
        mean: total.mean[0],
        std_error: (total.variance(0) / total.n as f64).sqrt(),
        n_samples,
    })
}

/// Batch mean of `n_samples` independent two-point estimates; `2 n_samples`
/// oracle calls.
pub fn smoothed_gradient(
    problem: &ProblemSpec,
    x: &[f64],
    params: &SmoothingParams,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<BatchGradient> {
    batch_gradient(problem, x, params.delta, n_samples, rng, 1.0)
}

pub fn smoothed_gradient_stochastic(
    problem: &StochasticProblemSpec,
    x: &[f64],
    params: &SmoothingParams,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<BatchGradient> {
    batch_gradient(problem, x, params.delta, n_samples, rng, 1.0)
}

/// Monte-Carlo estimate of `f_delta(x)` with ball sampling.
pub fn smoothed_value(
    problem: &ProblemSpec,
    x: &[f64],
    params: &SmoothingParams,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    check_point(problem.dim(), x)?;
    if n_samples < 2 {
        return Err(Error::invalid("smoothed_value needs n_samples >= 2"));
    }
    let dim = x.len();
    let delta = params.delta;
    let parts = chunked(n_samples, rng, "ball-chunk", |len, r| {
        let mut m = Moments::new(1);
        let mut u = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        for _ in 0..len {
            fill_unit_ball(&mut u, r);
            for i in 0..dim {
                y[i] = x[i] + delta * u[i];
            }
            let v = problem.value(&y);
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    step: 0,
                    point: y.clone(),
                    value: v,
                });
            }
            m.push_scaled(v, &[1.0]);
        }
        Ok(m)
    })?;
    let mut total = Moments::new(1);
    for p in &parts {
        total.merge(p);
    }
    Ok(McEstimate {
        mean: total.mean[0],
        std_error: (total.variance(0) / total.n as f64).sqrt(),
        n_samples,
    })
}

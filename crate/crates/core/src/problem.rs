//! Problem descriptions: value oracles plus the metadata the step-size
//! schedules consume.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::pwl::PiecewiseLinear1D;
use crate::rng::RngStream;
use crate::vector::{distance, Vector};

/// Declared constants of a problem instance.
///
/// `lipschitz` is L for deterministic problems and G (with E[L(xi)^2] <= G^2)
/// for stochastic ones. `value_gap` bounds f(x0) - inf f.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub dim: usize,
    pub lipschitz: f64,
    pub value_gap: f64,
    pub known_optimum: Option<f64>,
}

impl ProblemMeta {
    pub fn new(dim: usize, lipschitz: f64, value_gap: f64) -> Result<Self> {
        let meta = ProblemMeta {
            dim,
            lipschitz,
            value_gap,
            known_optimum: None,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn with_known_optimum(mut self, value: f64) -> Self {
        self.known_optimum = Some(value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be >= 1"));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::invalid(format!(
                "lipschitz must be positive, got {}",
                self.lipschitz
            )));
        }
        if !(self.value_gap > 0.0 && self.value_gap.is_finite()) {
            return Err(Error::invalid(format!(
                "value_gap must be positive, got {}",
                self.value_gap
            )));
        }
        Ok(())
    }
}

/// Deterministic value oracle f: R^d -> R.
pub trait Objective: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Exact gradient of the ball-smoothed function, `(x, delta) -> grad f_delta(x)`.
pub type SmoothedGradientFn = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub meta: ProblemMeta,
    pub initial_point: Vector,
    oracle: Arc<dyn Objective>,
    exact_gradient: Option<GradientFn>,
    smoothed_gradient: Option<SmoothedGradientFn>,
    goldstein: Option<PiecewiseLinear1D>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("meta", &self.meta)
            .field("initial_point", &self.initial_point)
            .field("exact_gradient", &self.exact_gradient.is_some())
            .field("smoothed_gradient", &self.smoothed_gradient.is_some())
            .field("goldstein", &self.goldstein)
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        meta: ProblemMeta,
        initial_point: Vector,
        oracle: Arc<dyn Objective>,
    ) -> Result<Self> {
        meta.validate()?;
        check_dim(meta.dim, initial_point.dim())?;
        Ok(ProblemSpec {
            name: name.into(),
            meta,
            initial_point,
            oracle,
            exact_gradient: None,
            smoothed_gradient: None,
            goldstein: None,
        })
    }

    pub fn with_exact_gradient(mut self, g: GradientFn) -> Self {
        self.exact_gradient = Some(g);
        self
    }

    pub fn with_smoothed_gradient(mut self, g: SmoothedGradientFn) -> Self {
        self.smoothed_gradient = Some(g);
        self
    }

    pub fn with_goldstein(mut self, pwl: PiecewiseLinear1D) -> Self {
        self.goldstein = Some(pwl);
        self
    }

    pub fn with_initial_point(mut self, x0: Vector) -> Result<Self> {
        check_dim(self.meta.dim, x0.dim())?;
        self.initial_point = x0;
        Ok(self)
    }

    pub fn with_value_gap(mut self, value_gap: f64) -> Result<Self> {
        self.meta.value_gap = value_gap;
        self.meta.validate()?;
        Ok(self)
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Result<Self> {
        self.meta.lipschitz = lipschitz;
        self.meta.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.oracle.value(x)
    }

    pub fn oracle(&self) -> &Arc<dyn Objective> {
        &self.oracle
    }

    /// Same metadata and extras, different value oracle (used for instrumentation).
    pub fn with_oracle(mut self, oracle: Arc<dyn Objective>) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn exact_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.exact_gradient.as_ref().map(|g| g(x))
    }

    pub fn reference_smoothed_gradient(&self, x: &[f64], delta: f64) -> Option<Vec<f64>> {
        self.smoothed_gradient.as_ref().map(|g| g(x, delta))
    }

    pub fn goldstein(&self) -> Option<&PiecewiseLinear1D> {
        self.goldstein.as_ref()
    }
}

/// Opaque sample identifier xi. The oracle is a pure function of `(x, token)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleToken(pub u64);

/// How a stochastic oracle's sample space looks, for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SampleSpace {
    /// Uniform over `0..n`.
    FiniteUniform { n: usize },
    /// Tokens are raw 64-bit draws; `description` names the induced law.
    Continuous { description: String },
}

/// Noisy value oracle F(x, xi) with E[F(x, xi)] = f(x).
pub trait StochasticObjective: Send + Sync {
    fn sample_space(&self) -> SampleSpace;

    fn draw(&self, rng: &mut RngStream) -> SampleToken {
        match self.sample_space() {
            SampleSpace::FiniteUniform { n } => SampleToken(rng.random_range(0..n as u64)),
            SampleSpace::Continuous { .. } => SampleToken(rng.random()),
        }
    }

    fn value(&self, x: &[f64], token: SampleToken) -> f64;

    /// Exact f(x) when it is computable (finite sums, additive noise).
    fn mean_value(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Clone)]
pub struct StochasticProblemSpec {
    pub name: String,
    pub meta: ProblemMeta,
    pub initial_point: Vector,
    oracle: Arc<dyn StochasticObjective>,
    smoothed_gradient: Option<SmoothedGradientFn>,
}

impl fmt::Debug for StochasticProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StochasticProblemSpec")
            .field("name", &self.name)
            .field("meta", &self.meta)
            .field("initial_point", &self.initial_point)
            .field("sample_space", &self.oracle.sample_space())
            .finish()
    }
}

impl StochasticProblemSpec {
    pub fn new(
        name: impl Into<String>,
        meta: ProblemMeta,
        initial_point: Vector,
        oracle: Arc<dyn StochasticObjective>,
    ) -> Result<Self> {
        meta.validate()?;
        check_dim(meta.dim, initial_point.dim())?;
        Ok(StochasticProblemSpec {
            name: name.into(),
            meta,
            initial_point,
            oracle,
            smoothed_gradient: None,
        })
    }

    /// Zero-variance wrapper: F(x, xi) = f(x) for every token.
    pub fn from_deterministic(problem: &ProblemSpec) -> Self {
        StochasticProblemSpec {
            name: problem.name.clone(),
            meta: problem.meta.clone(),
            initial_point: problem.initial_point.clone(),
            oracle: Arc::new(ZeroNoise(problem.oracle.clone())),
            smoothed_gradient: problem.smoothed_gradient.clone(),
        }
    }

    pub fn with_smoothed_gradient(mut self, g: SmoothedGradientFn) -> Self {
        self.smoothed_gradient = Some(g);
        self
    }

    pub fn with_initial_point(mut self, x0: Vector) -> Result<Self> {
        check_dim(self.meta.dim, x0.dim())?;
        self.initial_point = x0;
        Ok(self)
    }

    pub fn with_value_gap(mut self, value_gap: f64) -> Result<Self> {
        self.meta.value_gap = value_gap;
        self.meta.validate()?;
        Ok(self)
    }

    pub fn with_oracle(mut self, oracle: Arc<dyn StochasticObjective>) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn oracle(&self) -> &Arc<dyn StochasticObjective> {
        &self.oracle
    }

    pub fn sample_space(&self) -> SampleSpace {
        self.oracle.sample_space()
    }

    pub fn draw(&self, rng: &mut RngStream) -> SampleToken {
        self.oracle.draw(rng)
    }

    pub fn value(&self, x: &[f64], token: SampleToken) -> f64 {
        self.oracle.value(x, token)
    }

    pub fn mean_value(&self, x: &[f64]) -> Option<f64> {
        self.oracle.mean_value(x)
    }

    pub fn reference_smoothed_gradient(&self, x: &[f64], delta: f64) -> Option<Vec<f64>> {
        self.smoothed_gradient.as_ref().map(|g| g(x, delta))
    }

    /// The mean function as a deterministic problem, when a mean oracle exists.
    pub fn mean_problem(&self) -> Option<ProblemSpec> {
        self.oracle.mean_value(self.initial_point.as_slice())?;
        let oracle = self.oracle.clone();
        let mean: Arc<dyn Objective> = Arc::new(move |x: &[f64]| {
            oracle.mean_value(x).expect("mean oracle availability is fixed per problem")
        });
        let mut p = ProblemSpec::new(
            format!("{}-mean", self.name),
            self.meta.clone(),
            self.initial_point.clone(),
            mean,
        )
        .expect("metadata already validated");
        p.smoothed_gradient = self.smoothed_gradient.clone();
        Some(p)
    }
}

struct ZeroNoise(Arc<dyn Objective>);

impl StochasticObjective for ZeroNoise {
    fn sample_space(&self) -> SampleSpace {
        SampleSpace::FiniteUniform { n: 1 }
    }

    fn value(&self, x: &[f64], _token: SampleToken) -> f64 {
        self.0.value(x)
    }

    fn mean_value(&self, x: &[f64]) -> Option<f64> {
        Some(self.0.value(x))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Outcome of a Lipschitz spot-check. A violation is a diagnostic, not an error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub max_ratio: f64,
    pub declared: f64,
    pub n_pairs: usize,
    pub box_radius: f64,
    pub violated: bool,
}

pub const DEFAULT_SPOT_CHECK_RADIUS: f64 = 2.0;

/// Largest |f(x) - f(y)| / |x - y| over `n_pairs` pairs drawn uniformly in
/// `[-radius, radius]^d`.
pub fn lipschitz_spot_check(
    problem: &ProblemSpec,
    n_pairs: usize,
    radius: f64,
    rng: &mut RngStream,
) -> Result<SpotCheck> {
    let oracle = problem.oracle.clone();
    spot_check_with(
        problem.dim(),
        problem.meta.lipschitz,
        n_pairs,
        radius,
        rng,
        move |x| oracle.value(x),
    )
}

pub(crate) fn spot_check_with(
    dim: usize,
    declared: f64,
    n_pairs: usize,
    radius: f64,
    rng: &mut RngStream,
    f: impl Fn(&[f64]) -> f64,
) -> Result<SpotCheck> {
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be >= 1"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("spot-check radius must be positive"));
    }
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut max_ratio: f64 = 0.0;
    for _ in 0..n_pairs {
        for v in x.iter_mut().chain(y.iter_mut()) {
            *v = rng.random_range(-radius..=radius);
        }
        let dist = distance(&x, &y);
        if dist == 0.0 {
            continue;
        }
        let ratio = (f(&x) - f(&y)).abs() / dist;
        max_ratio = max_ratio.max(ratio);
    }
    Ok(SpotCheck {
        max_ratio,
        declared,
        n_pairs,
        box_radius: radius,
        // difference quotients of exactly-linear pieces carry a few ulps of roundoff
        violated: max_ratio > declared * (1.0 + 1e-9),
    })
}

/// Value oracle wrapper that counts invocations.
pub struct CountingObjective {
    inner: Arc<dyn Objective>,
    calls: AtomicU64,
}

impl CountingObjective {
    pub fn new(inner: Arc<dyn Objective>) -> Arc<Self> {
        Arc::new(CountingObjective {
            inner,
            calls: AtomicU64::new(0),
        })
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl Objective for CountingObjective {
    fn value(&self, x: &[f64]) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }
}

/// Counts noisy-oracle invocations `F(x, xi)`; mean-oracle calls are not counted.
pub struct CountingStochastic {
    inner: Arc<dyn StochasticObjective>,
    calls: AtomicU64,
}

impl CountingStochastic {
    pub fn new(inner: Arc<dyn StochasticObjective>) -> Arc<Self> {
        Arc::new(CountingStochastic {
            inner,
            calls: AtomicU64::new(0),
        })
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl StochasticObjective for CountingStochastic {
    fn sample_space(&self) -> SampleSpace {
        self.inner.sample_space()
    }

    fn draw(&self, rng: &mut RngStream) -> SampleToken {
        self.inner.draw(rng)
    }

    fn value(&self, x: &[f64], token: SampleToken) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x, token)
    }

    fn mean_value(&self, x: &[f64]) -> Option<f64> {
        self.inner.mean_value(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn scaled_norm(dim: usize, scale: f64, declared: f64) -> ProblemSpec {
        ProblemSpec::new(
            "scaled-norm",
            ProblemMeta::new(dim, declared, 1.0).unwrap(),
            Vector::zeros(dim).unwrap(),
            Arc::new(move |x: &[f64]| scale * crate::vector::norm(x)),
        )
        .unwrap()
    }

    #[test]
    fn norm_passes_spot_check() {
        let p = scaled_norm(3, 1.0, 1.0);
        let mut rng = derive_stream(1, "spot", 0);
        let r = lipschitz_spot_check(&p, 2000, DEFAULT_SPOT_CHECK_RADIUS, &mut rng).unwrap();
        assert!(r.max_ratio <= 1.0 + 1e-12);
        assert!(!r.violated);
    }

    #[test]
    fn understated_constant_is_reported() {
        let p = scaled_norm(3, 2.0, 1.0);
        let mut rng = derive_stream(1, "spot", 0);
        let r = lipschitz_spot_check(&p, 2000, DEFAULT_SPOT_CHECK_RADIUS, &mut rng).unwrap();
        assert!(r.violated);
        assert!(r.max_ratio > 1.0);
    }

    #[test]
    fn meta_validation() {
        assert!(ProblemMeta::new(0, 1.0, 1.0).is_err());
        assert!(ProblemMeta::new(1, 0.0, 1.0).is_err());
        assert!(ProblemMeta::new(1, 1.0, -1.0).is_err());
        let p = scaled_norm(2, 1.0, 1.0);
        assert!(matches!(
            p.with_initial_point(Vector::zeros(3).unwrap()),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn zero_noise_wrapper_matches() {
        let p = scaled_norm(2, 1.0, 1.0);
        let s = StochasticProblemSpec::from_deterministic(&p);
        let x = [3.0, 4.0];
        assert_eq!(s.value(&x, SampleToken(17)), 5.0);
        assert_eq!(s.mean_value(&x), Some(5.0));
        assert_eq!(s.mean_problem().unwrap().value(&x), 5.0);
    }
}

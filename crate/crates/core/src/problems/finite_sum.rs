//! Finite-sum objectives `f(x) = (1/n) sum_i F(x, i)` with per-component
//! Lipschitz bounds.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::problem::{
    Objective, ProblemMeta, ProblemSpec, SampleSpace, SampleToken, SmoothedGradientFn,
    StochasticObjective, StochasticProblemSpec,
};
use crate::problems::geometric::smoothed_abs_slope;
use crate::rng::RngStream;
use crate::sampling::fill_unit_sphere;
use crate::vector::{dot, Vector};

#[derive(Clone)]
pub struct FiniteSumProblem {
    pub name: String,
    pub meta: ProblemMeta,
    pub initial_point: Vector,
    components: Arc<Vec<Arc<dyn Objective>>>,
    component_lipschitz: Vec<f64>,
    smoothed_gradient: Option<SmoothedGradientFn>,
    minimizer: Option<Vector>,
}

impl fmt::Debug for FiniteSumProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteSumProblem")
            .field("name", &self.name)
            .field("meta", &self.meta)
            .field("n", &self.components.len())
            .finish()
    }
}

/// Root mean square of the component bounds.
pub fn g_bound(component_lipschitz: &[f64]) -> f64 {
    let n = component_lipschitz.len() as f64;
    (component_lipschitz.iter().map(|l| l * l).sum::<f64>() / n).sqrt()
}

impl FiniteSumProblem {
    /// Declared `lipschitz` in the metadata is `G = sqrt(mean L_i^2)`.
    pub fn new(
        name: impl Into<String>,
        components: Vec<Arc<dyn Objective>>,
        component_lipschitz: Vec<f64>,
        initial_point: Vector,
        value_gap: f64,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("finite sum needs at least one component"));
        }
        if components.len() != component_lipschitz.len() {
            return Err(Error::invalid("one Lipschitz bound per component"));
        }
        if component_lipschitz.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::invalid("component Lipschitz bounds must be finite and >= 0"));
        }
        let g = g_bound(&component_lipschitz);
        let meta = ProblemMeta::new(initial_point.dim(), g, value_gap)?;
        Ok(FiniteSumProblem {
            name: name.into(),
            meta,
            initial_point,
            components: Arc::new(components),
            component_lipschitz,
            smoothed_gradient: None,
            minimizer: None,
        })
    }

    pub fn with_smoothed_gradient(mut self, g: SmoothedGradientFn) -> Self {
        self.smoothed_gradient = Some(g);
        self
    }

    /// Records a point where every component attains its minimum.
    pub fn with_minimizer(mut self, x: Vector) -> Result<Self> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        self.minimizer = Some(x);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn g_bound(&self) -> f64 {
        self.meta.lipschitz
    }

    pub fn component_lipschitz(&self) -> &[f64] {
        &self.component_lipschitz
    }

    pub fn minimizer(&self) -> Option<&Vector> {
        self.minimizer.as_ref()
    }

    pub fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        self.components[i].value(x)
    }

    /// `(1/n) sum_i F(x, i)`, summed in index order.
    pub fn mean_value(&self, x: &[f64]) -> f64 {
        mean_of(&self.components, x)
    }

    pub fn to_stochastic(&self) -> Result<StochasticProblemSpec> {
        let spec = StochasticProblemSpec::new(
            self.name.clone(),
            self.meta.clone(),
            self.initial_point.clone(),
            Arc::new(Components(self.components.clone())),
        )?;
        Ok(match &self.smoothed_gradient {
            Some(g) => spec.with_smoothed_gradient(g.clone()),
            None => spec,
        })
    }

    /// The mean objective as a deterministic problem (declared `L = G`).
    pub fn mean_problem(&self) -> Result<ProblemSpec> {
        let comps = self.components.clone();
        let spec = ProblemSpec::new(
            self.name.clone(),
            self.meta.clone(),
            self.initial_point.clone(),
            Arc::new(move |x: &[f64]| mean_of(&comps, x)),
        )?;
        Ok(match &self.smoothed_gradient {
            Some(g) => spec.with_smoothed_gradient(g.clone()),
            None => spec,
        })
    }
}

fn mean_of(components: &[Arc<dyn Objective>], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for c in components {
        s += c.value(x);
    }
    s / components.len() as f64
}

struct Components(Arc<Vec<Arc<dyn Objective>>>);

impl StochasticObjective for Components {
    fn sample_space(&self) -> SampleSpace {
        SampleSpace::FiniteUniform { n: self.0.len() }
    }

    fn value(&self, x: &[f64], token: SampleToken) -> f64 {
        self.0[token.0 as usize].value(x)
    }

    fn mean_value(&self, x: &[f64]) -> Option<f64> {
        Some(mean_of(&self.0, x))
    }
}

/// `F(x, i) = <a_i, x> + b_i`; `grad f_delta = mean a_i` everywhere.
pub fn make_finite_sum_linear(coefs: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<FiniteSumProblem> {
    if coefs.is_empty() || coefs.len() != offsets.len() {
        return Err(Error::invalid("need matching, nonempty coefs and offsets"));
    }
    let dim = coefs[0].len();
    let mut comps: Vec<Arc<dyn Objective>> = Vec::with_capacity(coefs.len());
    let mut lips = Vec::with_capacity(coefs.len());
    for (a, b) in coefs.iter().zip(&offsets) {
        let a = Vector::new(a.clone())?;
        if a.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: a.dim(),
            });
        }
        lips.push(a.norm());
        let b = *b;
        comps.push(Arc::new(move |x: &[f64]| dot(&a, x) + b));
    }
    let mut mean = vec![0.0; dim];
    for a in &coefs {
        for (m, v) in mean.iter_mut().zip(a) {
            *m += v / coefs.len() as f64;
        }
    }
    let g = g_bound(&lips);
    if g == 0.0 {
        return Err(Error::invalid("all components are constant"));
    }
    Ok(FiniteSumProblem::new("finite-sum-linear", comps, lips, Vector::zeros(dim)?, g)?
        .with_smoothed_gradient(Arc::new(move |_: &[f64], _| mean.clone())))
}

/// `F(x, i) = |<a_i, x> - b_i|` with `|a_i|` uniform in [0.5, 1.5], random
/// direction, and `b_i` uniform in [-1, 1]. Starts at the origin; `f >= 0`
/// so `f(0)` is a valid gap. The smoothed gradient is exact.
pub fn make_finite_sum_pwl(dim: usize, n: usize, rng: &mut RngStream) -> Result<FiniteSumProblem> {
    if dim == 0 || n == 0 {
        return Err(Error::invalid("dim and n must be >= 1"));
    }
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut a = vec![0.0; dim];
        fill_unit_sphere(&mut a, rng);
        let scale = rng.random_range(0.5..1.5);
        a.iter_mut().for_each(|v| *v *= scale);
        let b: f64 = rng.random_range(-1.0..1.0);
        rows.push((a, b, scale));
    }
    let rows = Arc::new(rows);
    let comps: Vec<Arc<dyn Objective>> = (0..n)
        .map(|i| {
            let rows = rows.clone();
            Arc::new(move |x: &[f64]| (dot(&rows[i].0, x) - rows[i].1).abs()) as Arc<dyn Objective>
        })
        .collect();
    let lips: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let gap = rows.iter().map(|r| r.1.abs()).sum::<f64>() / n as f64;
    let sg = rows.clone();
    Ok(FiniteSumProblem::new("finite-sum-pwl", comps, lips, Vector::zeros(dim)?, gap.max(f64::MIN_POSITIVE))?
        .with_smoothed_gradient(Arc::new(move |x: &[f64], delta| {
            let mut g = vec![0.0; x.len()];
            for (a, b, scale) in sg.iter() {
                let slope = smoothed_abs_slope(x.len(), dot(a, x) - b, delta * scale);
                for (gi, ai) in g.iter_mut().zip(a) {
                    *gi += slope * ai / sg.len() as f64;
                }
            }
            g
        })))
}

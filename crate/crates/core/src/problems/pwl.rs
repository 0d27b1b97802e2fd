//! Continuous piecewise-linear functions on the real line. For these the
//! Goldstein subdifferential and the smoothed function are exactly computable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{ProblemMeta, ProblemSpec};
use crate::quadrature;
use crate::rng::RngStream;
use crate::vector::Vector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear1D {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    anchor: f64,
    #[serde(skip)]
    knot_values: Vec<f64>,
}

/// Closed interval `[lo, hi]` of slopes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldsteinInterval {
    pub lo: f64,
    pub hi: f64,
}

impl GoldsteinInterval {
    pub fn contains(&self, g: f64, tol: f64) -> bool {
        g >= self.lo - tol && g <= self.hi + tol
    }

    /// Element of minimal absolute value.
    pub fn min_norm_element(&self) -> f64 {
        if self.lo <= 0.0 && self.hi >= 0.0 {
            0.0
        } else if self.lo > 0.0 {
            self.lo
        } else {
            self.hi
        }
    }
}

impl PiecewiseLinear1D {
    /// `slopes[j]` applies on `(breakpoints[j-1], breakpoints[j])`, with the
    /// outer segments unbounded. `anchor` is the value at the first breakpoint
    /// (or at 0 when there are none).
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, anchor: f64) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::invalid(format!(
                "need {} slopes for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                slopes.len()
            )));
        }
        if breakpoints.iter().chain(&slopes).any(|v| !v.is_finite()) || !anchor.is_finite() {
            return Err(Error::invalid("breakpoints, slopes and anchor must be finite"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        let mut knot_values = Vec::with_capacity(breakpoints.len());
        if let Some(&b0) = breakpoints.first() {
            knot_values.push(anchor);
            let mut prev = (b0, anchor);
            for (j, &b) in breakpoints.iter().enumerate().skip(1) {
                let v = prev.1 + slopes[j] * (b - prev.0);
                knot_values.push(v);
                prev = (b, v);
            }
        }
        Ok(PiecewiseLinear1D {
            breakpoints,
            slopes,
            anchor,
            knot_values,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn lipschitz(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn value(&self, x: f64) -> f64 {
        if self.breakpoints.is_empty() {
            return self.anchor + self.slopes[0] * x;
        }
        // segment k covers (b[k-1], b[k]]
        let k = self.breakpoints.partition_point(|b| *b < x);
        if k == 0 {
            self.knot_values[0] + self.slopes[0] * (x - self.breakpoints[0])
        } else {
            self.knot_values[k - 1] + self.slopes[k] * (x - self.breakpoints[k - 1])
        }
    }

    /// Slope at a differentiability point (right slope at a breakpoint).
    pub fn slope_at(&self, x: f64) -> f64 {
        self.slopes[self.breakpoints.partition_point(|b| *b <= x)]
    }

    fn segment_bounds(&self, j: usize) -> (f64, f64) {
        let lo = if j == 0 {
            f64::NEG_INFINITY
        } else {
            self.breakpoints[j - 1]
        };
        let hi = self.breakpoints.get(j).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// Convex hull of the Clarke subdifferentials over `[x - delta, x + delta]`:
    /// the slope range of every closed segment meeting that interval.
    pub fn goldstein_interval(&self, x: f64, delta: f64) -> GoldsteinInterval {
        let (a, b) = (x - delta, x + delta);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (j, &s) in self.slopes.iter().enumerate() {
            let (sl, sh) = self.segment_bounds(j);
            if sl <= b && sh >= a {
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        GoldsteinInterval { lo, hi }
    }

    /// Gradient of the smoothed function: overlap-weighted average of the slopes.
    pub fn smoothed_gradient(&self, x: f64, delta: f64) -> f64 {
        let (a, b) = (x - delta, x + delta);
        let mut acc = 0.0;
        for (j, &s) in self.slopes.iter().enumerate() {
            let (sl, sh) = self.segment_bounds(j);
            let overlap = sh.min(b) - sl.max(a);
            if overlap > 0.0 {
                acc += s * overlap;
            }
        }
        acc / (2.0 * delta)
    }

    /// `f_delta(x) = 1/2 int_{-1}^{1} f(x + delta u) du` by adaptive quadrature.
    pub fn smoothed_value(&self, x: f64, delta: f64, tol: f64) -> f64 {
        let kinks: Vec<f64> = self.breakpoints.iter().map(|b| (b - x) / delta).collect();
        0.5 * quadrature::integrate(|u| self.value(x + delta * u), -1.0, 1.0, &kinks, tol)
    }

    /// `inf f` when the function is bounded below.
    pub fn infimum(&self) -> Option<f64> {
        let first = self.slopes[0];
        let last = *self.slopes.last().expect("at least one slope");
        if self.breakpoints.is_empty() {
            return (first == 0.0).then_some(self.anchor);
        }
        if first > 0.0 || last < 0.0 {
            return None;
        }
        Some(self.knot_values.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

/// Reference `(f_delta(x), grad f_delta(x))`: value by adaptive quadrature to
/// 1e-10, gradient by exact integration of the slopes.
pub fn smoothed_reference_1d(pwl: &PiecewiseLinear1D, x: f64, delta: f64) -> (f64, f64) {
    (pwl.smoothed_value(x, delta, 1e-10), pwl.smoothed_gradient(x, delta))
}

/// Wraps a piecewise-linear function as a 1-D problem starting at `x0 = 0`.
///
/// The declared value gap is `f(0) - inf f` when the function is bounded
/// below with a positive gap, and the nominal value `L` otherwise.
pub fn make_pwl_1d(breakpoints: Vec<f64>, slopes: Vec<f64>, anchor: f64) -> Result<ProblemSpec> {
    let pwl = PiecewiseLinear1D::new(breakpoints, slopes, anchor)?;
    pwl_problem("pwl1d", pwl)
}

pub(crate) fn pwl_problem(name: &str, pwl: PiecewiseLinear1D) -> Result<ProblemSpec> {
    let lipschitz = pwl.lipschitz().max(f64::MIN_POSITIVE);
    let x0 = 0.0;
    let gap = pwl
        .infimum()
        .map(|inf| pwl.value(x0) - inf)
        .filter(|g| *g > 0.0)
        .unwrap_or(lipschitz);
    let mut meta = ProblemMeta::new(1, lipschitz, gap)?;
    if let Some(inf) = pwl.infimum() {
        meta = meta.with_known_optimum(inf);
    }
    let f = pwl.clone();
    let g = pwl.clone();
    let s = pwl.clone();
    Ok(ProblemSpec::new(name, meta, Vector::new(vec![x0])?, Arc::new(move |x: &[f64]| f.value(x[0])))?
        .with_exact_gradient(Arc::new(move |x: &[f64]| vec![g.slope_at(x[0])]))
        .with_smoothed_gradient(Arc::new(move |x: &[f64], delta| vec![s.smoothed_gradient(x[0], delta)]))
        .with_goldstein(pwl))
}

pub fn abs() -> PiecewiseLinear1D {
    PiecewiseLinear1D::new(vec![0.0], vec![-1.0, 1.0], 0.0).expect("valid")
}

/// W shape: zeros at -1 and 1, local maximum 1 at the origin.
pub fn w_shape() -> PiecewiseLinear1D {
    PiecewiseLinear1D::new(vec![-1.0, 0.0, 1.0], vec![-1.0, 1.0, -1.0, 1.0], 0.0).expect("valid")
}

/// Flat then rising: `max(0, 2 (x - 0.5))`.
pub fn hinge() -> PiecewiseLinear1D {
    PiecewiseLinear1D::new(vec![0.5], vec![0.0, 2.0], 0.0).expect("valid")
}

/// Asymmetric V with its kink off the origin.
pub fn skewed_v() -> PiecewiseLinear1D {
    PiecewiseLinear1D::new(vec![0.2], vec![-3.0, 0.5], 0.0).expect("valid")
}

/// Random continuous sawtooth with 7 kinks in [-2, 2] and slopes in [-2, 2].
pub fn sawtooth(rng: &mut RngStream) -> PiecewiseLinear1D {
    use rand::Rng;
    let mut bps: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
    bps.sort_by(|a, b| a.total_cmp(b));
    bps.dedup();
    let slopes = (0..=bps.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
    PiecewiseLinear1D::new(bps, slopes, 0.0).expect("sorted, distinct")
}

/// The five reference instances used by the membership checks.
pub fn reference_instances(rng: &mut RngStream) -> Vec<(&'static str, PiecewiseLinear1D)> {
    vec![
        ("abs", abs()),
        ("w-shape", w_shape()),
        ("hinge", hinge()),
        ("skewed-v", skewed_v()),
        ("sawtooth", sawtooth(rng)),
    ]
}

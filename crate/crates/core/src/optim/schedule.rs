//! Closed-form step sizes, horizons, round counts and batch sizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::DEFAULT_SMOOTHING_CONSTANT;

/// Problem and accuracy parameters consumed by the schedules. For noisy
/// problems `lipschitz` is G.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInputs {
    pub dim: usize,
    pub lipschitz: f64,
    pub value_gap: f64,
    pub delta: f64,
    pub target: f64,
    pub confidence: f64,
    pub smoothing_constant: f64,
}

impl ScheduleInputs {
    pub fn new(dim: usize, lipschitz: f64, value_gap: f64, delta: f64) -> Self {
        ScheduleInputs {
            dim,
            lipschitz,
            value_gap,
            delta,
            target: 0.5,
            confidence: 0.1,
            smoothing_constant: DEFAULT_SMOOTHING_CONSTANT,
        }
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = target;
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn with_smoothing_constant(mut self, c: f64) -> Self {
        self.smoothing_constant = c;
        self
    }

    fn check_base(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be >= 1"));
        }
        for (name, v) in [
            ("lipschitz", self.lipschitz),
            ("value_gap", self.value_gap),
            ("delta", self.delta),
            ("smoothing_constant", self.smoothing_constant),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn check_target(&self) -> Result<()> {
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::invalid(format!("target must be in (0, 1), got {}", self.target)));
        }
        Ok(())
    }

    fn check_confidence(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }

    fn d_three_halves(&self) -> f64 {
        let d = self.dim as f64;
        d * d.sqrt()
    }
}

/// `eta = 0.1 sqrt(delta (Delta + delta L) / (c d^1.5 L^3 T))`.
pub fn schedule_eta(inputs: &ScheduleInputs, horizon: u64) -> Result<f64> {
    inputs.check_base()?;
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let ScheduleInputs {
        lipschitz: l,
        value_gap: gap,
        delta,
        smoothing_constant: c,
        ..
    } = *inputs;
    let num = delta * (gap + delta * l);
    let den = c * inputs.d_three_halves() * l * l * l * horizon as f64;
    Ok(0.1 * (num / den).sqrt())
}

/// Smallest S with `2^S >= 2 / confidence`, i.e. `ceil(log2(2 / confidence))`
/// without rounding trouble at exact powers of two.
pub fn rounds_for(confidence: f64) -> Result<u32> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(format!("confidence must be in (0, 1), got {confidence}")));
    }
    let mut s = (2.0 / confidence).log2().ceil().max(1.0) as u32;
    // 2^s * confidence is exact, so these comparisons are too
    while (2f64).powi(s as i32) * confidence < 2.0 {
        s += 1;
    }
    while s > 1 && (2f64).powi(s as i32 - 1) * confidence >= 2.0 {
        s -= 1;
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseSchedule {
    /// Rounded up.
    pub horizon: u64,
    pub rounds: u32,
    /// Rounded up.
    pub batch: u64,
    pub horizon_exact: f64,
    pub batch_exact: f64,
}

fn ceil_u64(v: f64) -> u64 {
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v.ceil() as u64
    }
}

/// `T = c d^1.5 L^3 (L + Delta/delta) (160 / eps^2)^2`, `S = ceil(log2(2/Lambda))`,
/// `B = 384 sqrt(2 pi) d L^2 (S + 1) / (Lambda eps^2)`.
pub fn schedule_two_phase(inputs: &ScheduleInputs) -> Result<TwoPhaseSchedule> {
    inputs.check_base()?;
    inputs.check_target()?;
    inputs.check_confidence()?;
    let ScheduleInputs {
        dim,
        lipschitz: l,
        value_gap: gap,
        delta,
        target: eps,
        confidence: lam,
        smoothing_constant: c,
    } = *inputs;
    let k = 160.0 / (eps * eps);
    let horizon_exact = c * inputs.d_three_halves() * l * l * l * (l + gap / delta) * (k * k);
    let rounds = rounds_for(lam)?;
    let batch_exact = 384.0 * (2.0 * std::f64::consts::PI).sqrt() * dim as f64 * l * l * (rounds as f64 + 1.0)
        / (lam * eps * eps);
    Ok(TwoPhaseSchedule {
        horizon: ceil_u64(horizon_exact),
        rounds,
        batch: ceil_u64(batch_exact),
        horizon_exact,
        batch_exact,
    })
}

/// Order estimate `d^1.5 (L^4 + Delta L^3 / delta) / eps^4`, constants omitted.
pub fn oracle_complexity_bound(inputs: &ScheduleInputs) -> Result<f64> {
    inputs.check_base()?;
    inputs.check_target()?;
    let l3 = inputs.lipschitz.powi(3);
    Ok(inputs.d_three_halves() * (l3 * inputs.lipschitz + inputs.value_gap * l3 / inputs.delta)
        / inputs.target.powi(4))
}

/// Right-hand side `20 sqrt(c d^1.5 L^3 (L + Delta/delta) / T)` of the averaged
/// descent inequality at the scheduled step.
pub fn descent_bound(inputs: &ScheduleInputs, horizon: u64) -> Result<f64> {
    inputs.check_base()?;
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let l = inputs.lipschitz;
    let inner = inputs.smoothing_constant * inputs.d_three_halves() * l * l * l * (l + inputs.value_gap / inputs.delta)
        / horizon as f64;
    Ok(20.0 * inner.sqrt())
}

/// `16 sqrt(2 pi) d L^2`, the bound on `E|g|^2` for one two-point estimate.
pub fn second_moment_bound(dim: usize, lipschitz: f64) -> f64 {
    16.0 * (2.0 * std::f64::consts::PI).sqrt() * dim as f64 * lipschitz * lipschitz
}

/// Desk-scale limits on scheduled T and B.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    pub max_horizon: u64,
    pub max_batch: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_horizon: 1_000_000,
            max_batch: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CappedSchedule {
    pub schedule: TwoPhaseSchedule,
    pub horizon: u64,
    pub batch: u64,
    pub rounds: u32,
    pub horizon_capped: bool,
    pub batch_capped: bool,
}

impl TwoPhaseSchedule {
    pub fn capped(&self, caps: &Caps) -> CappedSchedule {
        CappedSchedule {
            schedule: *self,
            horizon: self.horizon.min(caps.max_horizon),
            batch: self.batch.min(caps.max_batch),
            rounds: self.rounds,
            horizon_capped: self.horizon > caps.max_horizon,
            batch_capped: self.batch > caps.max_batch,
        }
    }
}

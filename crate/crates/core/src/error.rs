use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("oracle returned non-finite value {value} at step {step} (x = {point:?})")]
    NonFiniteValue {
        step: u64,
        point: Vec<f64>,
        value: f64,
    },

    #[error("iterate diverged at step {step}: |x| = {norm:e} exceeds bound {bound:e} (x = {point:?})")]
    Diverged {
        step: u64,
        norm: f64,
        bound: f64,
        point: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach the iteration index to an oracle failure raised outside a run loop.
    pub(crate) fn at_step(self, t: u64) -> Self {
        match self {
            Error::NonFiniteValue { point, value, .. } => Error::NonFiniteValue {
                step: t,
                point,
                value,
            },
            other => other,
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {value} outside [0, {bound}]")]
    OutOfDomain { value: f64, bound: f64 },

    #[error("step index {index} exceeds grid length {steps}")]
    StepOutOfRange { index: usize, steps: usize },

    #[error("covariance eigenvalue q_{index} = {value} is negative")]
    NegativeEigenvalue { index: usize, value: f64 },

    #[error("cannot parse spectrum `{input}`: {reason}")]
    SpectrumParse { input: String, reason: String },

    #[error("initial condition is identically zero")]
    ZeroInitialCondition,

    #[error("degenerate correlation: variance vanishes at t = {t}")]
    DegenerateCorrelation { t: f64 },

    #[error("deterministic mismatch for `{label}`: closed form {closed_form}, observed {observed} with zero spread")]
    DeterministicMismatch {
        label: String,
        closed_form: f64,
        observed: f64,
    },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("time step {dt} exceeds stability limit {dt_max}")]
    StepTooLarge { dt: f64, dt_max: f64 },

    #[error("blow-up at t = {t}: energy {energy} exceeds threshold {threshold}")]
    BlowUp { t: f64, energy: f64, threshold: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {value}")))
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {value}")))
    }
}

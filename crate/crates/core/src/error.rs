use thiserror::Error;

use crate::simulator::Trajectory;

pub type Result<T> = std::result::Result<T, HglError>;

#[derive(Debug, Error)]
pub enum HglError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("parameter `{field}` invalid: {reason}")]
    Validation { field: String, reason: String },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("refusing to enumerate 2^{0} equilibria (limit is n <= 20)")]
    TooManyUnits(usize),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64, partial: Box<Trajectory> },
}

impl HglError {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        HglError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

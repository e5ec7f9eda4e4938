//! Crate-wide error type.

use thiserror::Error;

use crate::qstate::QubitLabel;

/// Errors raised by state manipulation, noise channels and pipeline setup.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("register of {requested} qubits exceeds the dense-engine cap of {cap}")]
    RegisterTooLarge { requested: usize, cap: usize },

    #[error("duplicate qubit label {0}")]
    DuplicateLabel(QubitLabel),

    #[error("qubit label {0} not present in register")]
    LabelNotFound(QubitLabel),

    #[error("{name} = {value} outside valid range [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("attempt count M={m} not reducible to at most {max} by halving")]
    NonConformingAttempts { m: u64, max: u64 },

    #[error("nesting level {n} invalid for protocol pipelines (need n >= 1)")]
    InvalidNesting { n: u32 },

    #[error("operation requires a repetition-coded bank (m = 3), got m = {m}")]
    CodeSizeMismatch { m: usize },

    #[error("no rounds were accepted; QBERs undefined")]
    ZeroAcceptance,
}

impl SimError {
    pub(crate) fn out_of_range<T: crate::Scalar>(
        name: &'static str,
        value: T,
        lo: f64,
        hi: f64,
    ) -> Self {
        SimError::OutOfRange {
            name,
            value: value.as_f64(),
            lo,
            hi,
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T, E = SimError> = std::result::Result<T, E>;

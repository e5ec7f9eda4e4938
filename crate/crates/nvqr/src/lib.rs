//! Simulator for NV-center quantum-repeater QKD protocols.
//!
//! Four repeater protocols over a chain of 2ⁿ elementary links are supported:
//! two that distribute entanglement encoded in the three-qubit repetition code
//! (P1: encoded links everywhere, co-located swap mediators; P2: encoded links
//! on every other segment, remote mediators) and their uncoded counterparts
//! (P3, P4). The pipeline models gate depolarization, measurement flips and
//! memory decoherence, and reports QBERs, secret fraction and normalized
//! secret-key rates per NV center.
//!
//! Two faithful engines are provided: an exact dense density-matrix engine
//! ([`qstate`]) driving the channel-level pipeline, and a Monte Carlo
//! Pauli-frame engine ([`pauli`]) that samples the identical model trajectory
//! by trajectory. All core math is generic over the floating-point scalar via
//! [`Scalar`]; concrete `f64` aliases live at the crate root.

// Index loops over multiple co-indexed arrays are the clearer idiom in the
// dense contraction kernels.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod noise;
pub mod pauli;
pub mod protocols;
pub mod qkd;
pub mod qstate;
pub mod scalar;
pub mod timing;

pub use error::SimError;
pub use scalar::Scalar;

/// Dense state over double-precision complex entries (the default engine type).
pub type DensityMatrix64 = qstate::DensityMatrix<f64>;
/// Single-precision dense state, for memory-constrained experimentation.
pub type DensityMatrix32 = qstate::DensityMatrix<f32>;
/// Physical-parameter bundle at double precision.
pub type SystemParams64 = protocols::SystemParams<f64>;
/// Link/timing parameters at double precision.
pub type LinkParams64 = timing::LinkParams<f64>;
/// One evaluated parameter point at double precision.
pub type KeyRateRecord64 = qkd::KeyRateRecord<f64>;

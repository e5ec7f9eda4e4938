//! Batch runner for the repeater simulator: key-value sweep configs,
//! deterministic parallel evaluation, and figure-ready CSV/JSON datasets.

pub mod config;
pub mod emit;
pub mod figures;
pub mod sweep;

pub use config::{parse_config, ConfigError, OutputFormat, SweepSpec, SweepVar};
pub use emit::{emit_csv, emit_json, parse_json, CSV_HEADER};
pub use sweep::{run_sweep, Dataset, SweepRow};

//! Experiment harness for `samprec-core`: configuration, reproducible runs
//! and CSV/JSON reports behind the `samprec` binary.

// `!(x >= a)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod experiment;

pub use commands::{CommandOutput, Status};
pub use config::{Algorithm, ExperimentConfig, SystemKind};
pub use experiment::{prepare, run_experiment, run_on, ExperimentReport, Row, Setup, Summary};

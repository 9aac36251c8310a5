//! Experiment orchestration for the join-the-shortest-of-`L` model: JSON
//! configuration, per-kind runners with declared thresholds, and the
//! reports and CSV files they leave behind.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, Kind, Resolved, Thresholds};
pub use error::{LabError, Result};
pub use experiments::{run_all, run_experiment, run_resolved};
pub use report::{Check, Summary, TestReport};

/// Environment variable overriding the worker count when `--workers` is absent.
pub const WORKERS_ENV: &str = "JSQ_LAB_WORKERS";

//! Experiment harness around [`gansched_core`]: configuration files, the
//! online scheduling loop, the closed-form references and CSV reports.
//!
//! The `gansched` binary exposes the reports as subcommands.

#![warn(missing_debug_implementations, unused_qualifications)]

pub mod config;
pub mod experiment;
pub mod io;
pub mod online;
pub mod reports;

pub use config::{AlphaSource, ExperimentConfig, parse_config};
pub use online::{RunMetrics, run_online};

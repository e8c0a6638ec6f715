// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command implementations behind the `tecusum` binary.
//!
//! Output directory layout:
//!
//! - `calibration.json`, `false_alarm.csv`: written by `calibrate`.
//! - `curves/<scenario>.csv`, `scenarios/<scenario>.json`, `summary.json`:
//!   written by `simulate`, one scenario at a time.
//! - `report.csv`: written by `report`.

#![forbid(unsafe_code)]

pub mod commands;
pub mod config;
pub mod records;

pub use commands::{
    calibrate, detect, report, simulate, CliError, DetectMode, DetectOptions, ReportStatus,
};
pub use config::{ConfigError, ExperimentConfig};

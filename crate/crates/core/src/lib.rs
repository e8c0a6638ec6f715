// SPDX-License-Identifier: MIT OR Apache-2.0

//! Streaming detectors for temporary, possibly asynchronous changes in
//! multivariate data streams.
//!
//! The crate is organised bottom-up:
//!
//! - [`llr`]: pre/post-change observation models and their log-likelihood
//!   ratio increments.
//! - [`local`]: per-stream recursions (CUSUM `W`, temporary-event CUSUM `G`,
//!   finite moving average `Z`) and the change-point estimator.
//! - [`fusion`]: aggregation of per-stream statistics (sum, max, fixed and
//!   adaptive censoring) and the [`fusion::GlobalDetector`].
//! - [`calibration`]: Monte Carlo ARL2FA estimation and threshold search.
//! - [`scenario`]: synthetic multi-sensor observation streams.
//! - [`metrics`]: detection-rate curves, delays and multi-method comparisons.
//! - [`seed`]: reproducible seed splitting for parallel replicas.

#![forbid(unsafe_code)]

pub mod calibration;
pub mod fusion;
pub mod llr;
pub mod local;
pub mod metrics;
pub mod scenario;
pub mod seed;

pub use calibration::{
    calibrate_threshold, estimate_arl, false_alarm_curve, ArlEstimate, ArlOptions,
    CalibrationError, CalibrationOptions, CalibrationResult,
};
pub use fusion::{
    CensorLevel, DetectorConfig, FusedStatistic, FusionError, FusionKind, FusionRule,
    GlobalDetector, LocalStatistic, Method,
};
pub use llr::{GaussianMeanShiftModel, LlrIncrement, LlrModel, ModelError};
pub use local::{ChangePointEstimate, CusumState, FmaState, StateError, TeCusumState};
pub use metrics::{
    average_delay, compare_methods, detection_rate_curve, CalibratedMethod, CurveSet, DelaySummary,
    MetricsError, PreChangeMode, RunRecord,
};
pub use scenario::{ObservationMatrix, ScenarioError, ScenarioPreset, ScenarioSpec};

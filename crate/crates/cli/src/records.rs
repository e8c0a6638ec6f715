// SPDX-License-Identifier: MIT OR Apache-2.0

//! On-disk JSON schemas. Every top-level document carries `schema_version`;
//! fields are only ever added, never renamed, within a version.

use crate::config::ModelConfig;
use serde::{Deserialize, Serialize};
use tecusum::fusion::{CensorLevel, FusionKind, FusionRule, LocalStatistic};
use tecusum::metrics::ChangePointSummary;
use tecusum::{DelaySummary, ScenarioSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Identity of a fusion rule as written in result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub statistic: String,
    pub fusion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_fraction: Option<f64>,
}

impl From<&FusionRule> for RuleRecord {
    fn from(rule: &FusionRule) -> Self {
        let mut r = RuleRecord {
            statistic: rule.statistic.name().to_string(),
            fusion: rule.kind.name().to_string(),
            window: None,
            alpha: None,
            c: None,
            c_fraction: None,
        };
        if let LocalStatistic::Fma { window } = rule.statistic {
            r.window = Some(window);
        }
        match rule.kind {
            FusionKind::CensoredAdaptive { alpha } => r.alpha = Some(alpha),
            FusionKind::CensoredFixed(CensorLevel::Absolute(c)) => r.c = Some(c),
            FusionKind::CensoredFixed(CensorLevel::ThresholdFraction(f)) => r.c_fraction = Some(f),
            FusionKind::Sum | FusionKind::Max => {}
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub name: String,
    pub rule: RuleRecord,
    pub threshold: f64,
    /// ARL2FA on the calibration intervals.
    pub achieved_arl: f64,
    pub standard_error: f64,
    pub intervals: usize,
    pub iterations: usize,
    pub converged: bool,
    /// ARL2FA re-estimated on independent intervals.
    pub verified_arl: f64,
    pub verified_standard_error: f64,
    /// Empirical probability of a one-shot false alarm within the FA horizon.
    pub fa_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub schema_version: u32,
    pub seed: u64,
    pub target_arl: f64,
    pub tolerance: f64,
    pub model: ModelConfig,
    pub fa_horizon: u64,
    pub fa_runs: usize,
    pub methods: Vec<CalibrationRecord>,
}

impl CalibrationFile {
    pub fn method(&self, name: &str) -> Option<&CalibrationRecord> {
        self.methods.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecRecord {
    pub num_sensors: usize,
    pub affected: Vec<usize>,
    pub amplitude: f64,
    pub sigma: f64,
    pub exposure_len: u64,
    pub onset: u64,
    pub stagger: u64,
    pub horizon: u64,
    pub exposure_start: u64,
    pub exposure_end: u64,
}

impl From<&ScenarioSpec> for SpecRecord {
    fn from(s: &ScenarioSpec) -> Self {
        Self {
            num_sensors: s.num_sensors,
            affected: s.affected.clone(),
            amplitude: s.amplitude,
            sigma: s.sigma,
            exposure_len: s.exposure_len,
            onset: s.onset,
            stagger: s.stagger,
            horizon: s.horizon,
            exposure_start: s.exposure_start(),
            exposure_end: s.exposure_end(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRecord {
    pub mean: f64,
    pub standard_error: f64,
    pub detections: usize,
}

impl From<DelaySummary> for DelayRecord {
    fn from(d: DelaySummary) -> Self {
        Self {
            mean: d.mean,
            standard_error: d.standard_error,
            detections: d.detections,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointRecord {
    pub mean_error: f64,
    pub mean_abs_error: f64,
    pub count: usize,
}

impl From<ChangePointSummary> for ChangePointRecord {
    fn from(c: ChangePointSummary) -> Self {
        Self {
            mean_error: c.mean_error,
            mean_abs_error: c.mean_abs_error,
            count: c.count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub name: String,
    pub threshold: f64,
    /// Detection rate at the last exposed sample.
    pub rate_at_end_of_exposure: f64,
    pub final_rate: f64,
    /// Runs alarming before the exposure start.
    pub pre_change_alarms: usize,
    /// Runs without any alarm.
    pub missed: usize,
    pub delay: Option<DelayRecord>,
    pub change_point: Option<ChangePointRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub schema_version: u32,
    pub name: String,
    pub spec: SpecRecord,
    pub runs: usize,
    pub seed: u64,
    pub pre_change: String,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub seed: u64,
    pub runs: usize,
    pub target_arl: f64,
    pub scenarios: Vec<ScenarioSummary>,
}

/// One alarm of `detect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmRecord {
    pub method: String,
    pub rule: RuleRecord,
    /// 1-based data row of the alarm.
    pub sample: u64,
    pub value: f64,
    pub active_set: Vec<usize>,
    /// Per-sensor change-point estimate (last pre-change sample).
    pub nu_hat: Vec<Option<u64>>,
}

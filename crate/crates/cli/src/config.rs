// SPDX-License-Identifier: MIT OR Apache-2.0

//! Experiment configuration: one TOML file drives calibration, simulation and
//! detection.
//!
//! ```toml
//! seed = 1
//! runs = 2000
//! output = "results"
//!
//! [model]
//! sensors = 10
//! mu0 = 0.0
//! mu1 = 0.398
//! sigma = 1.0
//!
//! [methods]
//! preset = "validation"
//! alpha = 0.6
//!
//! [calibration]
//! target_arl = 30000.0
//!
//! [scenario]
//! preset = "scenario-1"
//! ```

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tecusum::fusion::{CensorLevel, FusionKind, FusionRule, LocalStatistic, Method};
use tecusum::scenario::{preset_specs, ScenarioSpec};
use tecusum::{CalibrationOptions, DetectorConfig, GaussianMeanShiftModel, PreChangeMode};
use thiserror::Error;

pub const METHOD_PRESET: &str = "validation";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid value for `{field}`: {reason}")]
    Field { field: String, reason: String },
}

fn field(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub runs: usize,
    pub output: PathBuf,
    #[serde(default)]
    pub pre_change: PreChange,
    pub model: ModelConfig,
    pub methods: MethodsConfig,
    pub calibration: CalibrationConfig,
    pub scenario: ScenarioConfig,
}

/// Whether alarms before the exposure start count as detections on curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreChange {
    #[default]
    Include,
    Exclude,
}

impl From<PreChange> for PreChangeMode {
    fn from(p: PreChange) -> Self {
        match p {
            PreChange::Include => PreChangeMode::IncludePreChange,
            PreChange::Exclude => PreChangeMode::ExcludePreChange,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub sensors: usize,
    pub mu0: f64,
    /// Expected post-change mean.
    pub mu1: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Adaptive censoring level of the preset methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub custom: Vec<MethodConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticName {
    Cusum,
    TeCusum,
    Fma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionName {
    Sum,
    Max,
    CensoredFixed,
    CensoredAdaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: String,
    pub statistic: StatisticName,
    pub fusion: FusionName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Absolute censoring level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Censoring level as a fraction of the threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub target_arl: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_intervals")]
    pub min_intervals: usize,
    /// Per-interval sample budget as a multiple of the target.
    #[serde(default = "default_budget_factor")]
    pub budget_factor: f64,
    #[serde(default = "default_fa_horizon")]
    pub fa_horizon: u64,
    #[serde(default = "default_fa_runs")]
    pub fa_runs: usize,
}

fn default_tolerance() -> f64 {
    0.05
}
fn default_intervals() -> usize {
    200
}
fn default_budget_factor() -> f64 {
    100.0
}
fn default_fa_horizon() -> u64 {
    1000
}
fn default_fa_runs() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spec: Vec<SpecConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub name: String,
    pub affected: Vec<usize>,
    pub amplitude: f64,
    pub sigma: f64,
    pub exposure_len: u64,
    pub onset: u64,
    pub stagger: u64,
    pub horizon: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<config>"),
            source: Box::new(e),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 {
            return Err(field("runs", "must be at least 1"));
        }
        self.model()?;
        self.methods()?;
        self.calibration.options()?;
        self.scenarios()?;
        Ok(())
    }

    pub fn model(&self) -> Result<GaussianMeanShiftModel, ConfigError> {
        if self.model.sensors == 0 {
            return Err(field("model.sensors", "must be at least 1"));
        }
        GaussianMeanShiftModel::new(self.model.mu0, self.model.mu1, self.model.sigma)
            .map_err(|e| field("model", e.to_string()))
    }

    /// Method names and detector configurations, in declaration order.
    pub fn methods(&self) -> Result<Vec<(String, DetectorConfig)>, ConfigError> {
        let model = self.model()?;
        let m = &self.methods;
        let mut methods: Vec<Method> = Vec::new();
        match m.preset.as_deref() {
            Some(METHOD_PRESET) => {
                let alpha = m
                    .alpha
                    .ok_or_else(|| field("methods.alpha", "required by the validation preset"))?;
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(field(
                        "methods.alpha",
                        format!("must lie in [0, 1], got {alpha}"),
                    ));
                }
                methods.extend(Method::validation_set(alpha));
            }
            Some(other) => {
                return Err(field(
                    "methods.preset",
                    format!("unknown preset {other:?} (expected {METHOD_PRESET:?})"),
                ))
            }
            None if m.alpha.is_some() => {
                return Err(field("methods.alpha", "only used with a preset"))
            }
            None => {}
        }
        for (i, c) in m.custom.iter().enumerate() {
            methods.push(Method::new(
                c.name.clone(),
                c.rule(&format!("methods.custom[{i}]"))?,
            ));
        }
        if methods.is_empty() {
            return Err(field(
                "methods",
                "set a preset or at least one custom method",
            ));
        }
        let mut names = std::collections::BTreeSet::new();
        for method in &methods {
            if method.name.is_empty() || !names.insert(method.name.clone()) {
                return Err(field(
                    "methods",
                    format!(
                        "method names must be nonempty and unique ({:?})",
                        method.name
                    ),
                ));
            }
        }
        Ok(methods
            .into_iter()
            .map(|m| {
                (
                    m.name,
                    DetectorConfig::homogeneous(model, self.model.sensors, m.rule),
                )
            })
            .collect())
    }

    pub fn scenarios(&self) -> Result<Vec<ScenarioSpec>, ConfigError> {
        let s = &self.scenario;
        let specs = match (&s.preset, s.spec.is_empty()) {
            (Some(name), true) => {
                preset_specs(name).map_err(|e| field("scenario.preset", e.to_string()))?
            }
            (None, false) => s
                .spec
                .iter()
                .map(|c| ScenarioSpec {
                    name: c.name.clone(),
                    num_sensors: self.model.sensors,
                    affected: c.affected.clone(),
                    amplitude: c.amplitude,
                    sigma: c.sigma,
                    exposure_len: c.exposure_len,
                    onset: c.onset,
                    stagger: c.stagger,
                    horizon: c.horizon,
                })
                .collect(),
            _ => {
                return Err(field(
                    "scenario",
                    "set exactly one of `preset` and `spec` entries",
                ))
            }
        };
        let mut names = std::collections::BTreeSet::new();
        for (i, spec) in specs.iter().enumerate() {
            spec.validate()
                .map_err(|e| field(format!("scenario.spec[{i}]"), e.to_string()))?;
            if spec.num_sensors != self.model.sensors {
                return Err(field(
                    "model.sensors",
                    format!("scenario {} has {} sensors", spec.name, spec.num_sensors),
                ));
            }
            let safe = spec
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if spec.name.is_empty() || !safe || !names.insert(spec.name.clone()) {
                return Err(field(
                    format!("scenario.spec[{i}].name"),
                    "must be unique and use only letters, digits, '-' and '_'",
                ));
            }
        }
        Ok(specs)
    }
}

impl MethodConfig {
    pub fn rule(&self, at: &str) -> Result<FusionRule, ConfigError> {
        let statistic = match (self.statistic, self.window) {
            (StatisticName::Fma, Some(window)) => LocalStatistic::Fma { window },
            (StatisticName::Fma, None) => {
                return Err(field(format!("{at}.window"), "required for fma"))
            }
            (_, Some(_)) => return Err(field(format!("{at}.window"), "only valid for fma")),
            (StatisticName::Cusum, None) => LocalStatistic::Cusum,
            (StatisticName::TeCusum, None) => LocalStatistic::TeCusum,
        };
        let kind = match self.fusion {
            FusionName::CensoredAdaptive => FusionKind::CensoredAdaptive {
                alpha: self.alpha.ok_or_else(|| {
                    field(format!("{at}.alpha"), "required for censored-adaptive")
                })?,
            },
            FusionName::CensoredFixed => match (self.c, self.c_fraction) {
                (Some(c), None) => FusionKind::CensoredFixed(CensorLevel::Absolute(c)),
                (None, Some(f)) => FusionKind::CensoredFixed(CensorLevel::ThresholdFraction(f)),
                _ => {
                    return Err(field(
                        format!("{at}.c"),
                        "censored-fixed needs exactly one of `c` and `c_fraction`",
                    ))
                }
            },
            FusionName::Sum => FusionKind::Sum,
            FusionName::Max => FusionKind::Max,
        };
        if self.alpha.is_some() && self.fusion != FusionName::CensoredAdaptive {
            return Err(field(
                format!("{at}.alpha"),
                "only valid for censored-adaptive",
            ));
        }
        if (self.c.is_some() || self.c_fraction.is_some())
            && self.fusion != FusionName::CensoredFixed
        {
            return Err(field(format!("{at}.c"), "only valid for censored-fixed"));
        }
        FusionRule::new(kind, statistic).map_err(|e| field(at, e.to_string()))
    }
}

impl CalibrationConfig {
    pub fn options(&self) -> Result<CalibrationOptions, ConfigError> {
        if !(self.target_arl.is_finite() && self.target_arl >= 1.0) {
            return Err(field("calibration.target_arl", "must be at least 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(field("calibration.tolerance", "must lie in (0, 1)"));
        }
        if self.min_intervals < 30 {
            return Err(field("calibration.min_intervals", "must be at least 30"));
        }
        if !(self.budget_factor.is_finite() && self.budget_factor >= 1.0) {
            return Err(field("calibration.budget_factor", "must be at least 1"));
        }
        if self.fa_horizon == 0 || self.fa_runs < 100 {
            return Err(field(
                "calibration.fa_runs",
                "false-alarm curves need a positive horizon and at least 100 runs",
            ));
        }
        Ok(CalibrationOptions {
            min_intervals: self.min_intervals,
            budget_factor: self.budget_factor,
            ..CalibrationOptions::default()
        })
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run records, cumulative detection-rate curves, delays and multi-method
//! comparisons on shared observation streams.
//!
//! Time on every curve is counted from the first exposed sample: `t = 0` is
//! `exposure_start`.

use crate::calibration::{calibrate_threshold, CalibrationError, CalibrationOptions};
use crate::fusion::{DetectorConfig, FusionError, FusionKind, GlobalDetector};
use crate::scenario::{ObservationMatrix, ScenarioError, ScenarioSpec};
use crate::seed;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no run records")]
    Empty,
    #[error("no run alarmed after the exposure start ({censored} without alarm, {pre_change} before exposure)")]
    NoDetections { censored: usize, pre_change: usize },
    #[error("method {0} has no calibrated threshold")]
    Uncalibrated(String),
    #[error(
        "method {method} monitors {got} streams but scenario {scenario} has {expected} sensors"
    )]
    Width {
        method: String,
        scenario: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// Outcome of one one-shot run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunRecord {
    pub alarm_time: Option<u64>,
    pub exposure_start: u64,
    /// Last sample at which any sensor is exposed.
    pub exposure_end: u64,
    /// Change-point estimate of the stream with the largest local statistic at the alarm.
    pub nu_hat: Option<u64>,
    pub seed: u64,
}

impl RunRecord {
    /// `alarm_time - exposure_start`; negative for pre-change alarms.
    pub fn delay(&self) -> Option<i64> {
        self.alarm_time
            .map(|a| a as i64 - self.exposure_start as i64)
    }

    pub fn is_pre_change(&self) -> bool {
        self.delay().is_some_and(|d| d < 0)
    }
}

/// Whether alarms before the exposure start count as detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreChangeMode {
    #[default]
    IncludePreChange,
    ExcludePreChange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveMetadata {
    pub label: String,
    pub runs: usize,
    /// Threshold of each series, in series order.
    pub thresholds: Vec<f64>,
    pub target_arl: Option<f64>,
}

/// Named curves over a common time axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveSet {
    pub time: Vec<i64>,
    pub series: Vec<Series>,
    pub metadata: CurveMetadata,
}

impl CurveSet {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Value of series `name` at time `t`, clamped to the ends of the axis.
    pub fn value_at(&self, name: &str, t: i64) -> Option<f64> {
        let s = self.series(name)?;
        let first = *self.time.first()?;
        let i = (t - first).clamp(0, s.values.len() as i64 - 1) as usize;
        Some(s.values[i])
    }
}

/// Cumulative fraction of runs with `alarm_time <= exposure_start + t` for
/// `t = 0..=horizon - exposure_start`.
///
/// In [`PreChangeMode::ExcludePreChange`] runs that alarmed before the exposure
/// are removed from numerator and denominator; if every run did, the curve is
/// all zeros.
pub fn detection_rate(records: &[RunRecord], horizon: u64, mode: PreChangeMode) -> Vec<f64> {
    let start = records.iter().map(|r| r.exposure_start).min().unwrap_or(0);
    let len = horizon.saturating_sub(start) as usize + 1;
    let mut counts = vec![0u64; len];
    let mut runs = 0u64;
    for r in records {
        if mode == PreChangeMode::ExcludePreChange && r.is_pre_change() {
            continue;
        }
        runs += 1;
        if let Some(d) = r.delay() {
            let i = d.max(0) as usize;
            if i < len {
                counts[i] += 1;
            }
        }
    }
    let mut acc = 0;
    counts
        .into_iter()
        .map(|c| {
            acc += c;
            if runs == 0 {
                0.0
            } else {
                acc as f64 / runs as f64
            }
        })
        .collect()
}

/// Single-series [`CurveSet`] from [`detection_rate`].
pub fn detection_rate_curve(
    records: &[RunRecord],
    horizon: u64,
    mode: PreChangeMode,
) -> Result<CurveSet, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let values = detection_rate(records, horizon, mode);
    Ok(CurveSet {
        time: (0..values.len() as i64).collect(),
        series: vec![Series {
            name: "detection_rate".into(),
            values,
        }],
        metadata: CurveMetadata {
            runs: records.len(),
            ..CurveMetadata::default()
        },
    })
}

/// Mean detection delay over runs alarming at or after the exposure start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySummary {
    pub mean: f64,
    pub standard_error: f64,
    pub detections: usize,
    /// Runs without an alarm.
    pub censored: usize,
    /// Runs alarming before the exposure start.
    pub pre_change: usize,
}

pub fn average_delay(records: &[RunRecord]) -> Result<DelaySummary, MetricsError> {
    let (mut sum, mut sum2, mut detections, mut censored, mut pre_change) = (0.0, 0.0, 0, 0, 0);
    for r in records {
        match r.delay() {
            None => censored += 1,
            Some(d) if d < 0 => pre_change += 1,
            Some(d) => {
                let d = d as f64;
                sum += d;
                sum2 += d * d;
                detections += 1;
            }
        }
    }
    if detections == 0 {
        return Err(MetricsError::NoDetections {
            censored,
            pre_change,
        });
    }
    let n = detections as f64;
    let mean = sum / n;
    let standard_error = if detections > 1 {
        (((sum2 - n * mean * mean) / (n - 1.0)).max(0.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(DelaySummary {
        mean,
        standard_error,
        detections,
        censored,
        pre_change,
    })
}

/// Error of `nu_hat` against the true change point `exposure_start - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangePointSummary {
    pub mean_error: f64,
    pub mean_abs_error: f64,
    pub count: usize,
}

/// Summary over detecting runs that carry an estimate; `None` if there are none.
pub fn change_point_error(records: &[RunRecord]) -> Option<ChangePointSummary> {
    let errors: Vec<f64> = records
        .iter()
        .filter(|r| r.delay().is_some_and(|d| d >= 0))
        .filter_map(|r| {
            r.nu_hat
                .map(|nu| nu as f64 - (r.exposure_start as f64 - 1.0))
        })
        .collect();
    if errors.is_empty() {
        return None;
    }
    let n = errors.len() as f64;
    Some(ChangePointSummary {
        mean_error: errors.iter().sum::<f64>() / n,
        mean_abs_error: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
        count: errors.len(),
    })
}

/// A named detector configuration and its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedMethod {
    pub name: String,
    pub config: DetectorConfig,
    pub threshold: Option<f64>,
}

/// Records and curves of every method on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecComparison {
    pub spec: ScenarioSpec,
    pub curves: CurveSet,
    /// Run records per method, in method order.
    pub records: Vec<Vec<RunRecord>>,
}

/// Seed of replica `r` of a scenario; shared by every method.
pub fn replica_seed(master: u64, spec: &ScenarioSpec, r: u64) -> u64 {
    seed::derive(master, &[seed::DATA, seed::label(&spec.name), r])
}

struct Runner {
    detectors: Vec<GlobalDetector>,
    records: Vec<Option<RunRecord>>,
    exposure_start: u64,
    exposure_end: u64,
    seed: u64,
}

impl Runner {
    fn new(
        detectors: Vec<GlobalDetector>,
        exposure_start: u64,
        exposure_end: u64,
        seed: u64,
    ) -> Self {
        let records = vec![None; detectors.len()];
        Self {
            detectors,
            records,
            exposure_start,
            exposure_end,
            seed,
        }
    }

    /// Feeds one row to every detector still running; false when all have alarmed.
    fn feed(&mut self, row: &[f64]) -> Result<bool, FusionError> {
        let mut running = false;
        for (det, rec) in self.detectors.iter_mut().zip(self.records.iter_mut()) {
            if rec.is_some() {
                continue;
            }
            let step = det.step(row)?;
            if step.alarm {
                *rec = Some(record(
                    det,
                    Some(step.n),
                    self.exposure_start,
                    self.exposure_end,
                    self.seed,
                ));
            } else {
                running = true;
            }
        }
        Ok(running)
    }

    fn finish(self) -> Vec<RunRecord> {
        self.records
            .iter()
            .zip(&self.detectors)
            .map(|(r, d)| {
                r.unwrap_or_else(|| {
                    record(d, None, self.exposure_start, self.exposure_end, self.seed)
                })
            })
            .collect()
    }
}

fn record(
    det: &GlobalDetector,
    alarm_time: Option<u64>,
    exposure_start: u64,
    exposure_end: u64,
    seed: u64,
) -> RunRecord {
    let values = det.local_values();
    let lead = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b]));
    let nu_hat = alarm_time
        .and(lead)
        .and_then(|i| det.change_points()[i])
        .map(|e| e.nu_hat);
    RunRecord {
        alarm_time,
        exposure_start,
        exposure_end,
        nu_hat,
        seed,
    }
}

fn detectors_for(
    methods: &[CalibratedMethod],
    spec_name: &str,
    width: usize,
) -> Result<Vec<GlobalDetector>, MetricsError> {
    methods
        .iter()
        .map(|m| {
            let h = m
                .threshold
                .ok_or_else(|| MetricsError::Uncalibrated(m.name.clone()))?;
            if m.config.num_streams() != width {
                return Err(MetricsError::Width {
                    method: m.name.clone(),
                    scenario: spec_name.to_string(),
                    expected: width,
                    got: m.config.num_streams(),
                });
            }
            Ok(GlobalDetector::new(&m.config, h)?)
        })
        .collect()
}

/// One replica of `spec`: every method sees the same rows. One record per method.
pub fn run_replica(
    spec: &ScenarioSpec,
    methods: &[CalibratedMethod],
    replica_seed: u64,
) -> Result<Vec<RunRecord>, MetricsError> {
    let detectors = detectors_for(methods, &spec.name, spec.num_sensors)?;
    let mut stream = spec.stream(replica_seed)?;
    let mut runner = Runner::new(
        detectors,
        spec.exposure_start(),
        spec.exposure_end(),
        replica_seed,
    );
    let mut row = vec![0.0; spec.num_sensors];
    while stream.fill_row(&mut row) {
        if !runner.feed(&row)? {
            break;
        }
    }
    Ok(runner.finish())
}

/// As [`run_replica`] on a stored matrix.
pub fn run_matrix(
    matrix: &ObservationMatrix,
    exposure_start: u64,
    exposure_end: u64,
    methods: &[CalibratedMethod],
    seed: u64,
) -> Result<Vec<RunRecord>, MetricsError> {
    let detectors = detectors_for(methods, "matrix", matrix.num_sensors)?;
    let mut runner = Runner::new(detectors, exposure_start, exposure_end, seed);
    for row in matrix.rows() {
        if !runner.feed(row)? {
            break;
        }
    }
    Ok(runner.finish())
}

/// `runs` replicas of `spec`; records per method, in method order.
pub fn run_spec(
    spec: &ScenarioSpec,
    methods: &[CalibratedMethod],
    runs: usize,
    master_seed: u64,
) -> Result<Vec<Vec<RunRecord>>, MetricsError> {
    detectors_for(methods, &spec.name, spec.num_sensors)?;
    spec.validate()?;
    let replicas = (0..runs as u64)
        .into_par_iter()
        .map(|r| run_replica(spec, methods, replica_seed(master_seed, spec, r)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut per_method = vec![Vec::with_capacity(runs); methods.len()];
    for replica in replicas {
        for (m, rec) in replica.into_iter().enumerate() {
            per_method[m].push(rec);
        }
    }
    Ok(per_method)
}

/// Detection-rate curves of every method on every scenario, on shared noise.
pub fn compare_methods(
    specs: &[ScenarioSpec],
    methods: &[CalibratedMethod],
    runs: usize,
    master_seed: u64,
    mode: PreChangeMode,
) -> Result<Vec<SpecComparison>, MetricsError> {
    if runs == 0 {
        return Err(MetricsError::InvalidArgument(
            "runs must be at least 1".into(),
        ));
    }
    specs
        .iter()
        .map(|spec| {
            let records = run_spec(spec, methods, runs, master_seed)?;
            let series: Vec<Series> = methods
                .iter()
                .zip(&records)
                .map(|(m, recs)| Series {
                    name: m.name.clone(),
                    values: detection_rate(recs, spec.horizon, mode),
                })
                .collect();
            let len = series.first().map_or(0, |s| s.values.len());
            Ok(SpecComparison {
                curves: CurveSet {
                    time: (0..len as i64).collect(),
                    series,
                    metadata: CurveMetadata {
                        label: spec.name.clone(),
                        runs,
                        thresholds: methods.iter().filter_map(|m| m.threshold).collect(),
                        target_arl: None,
                    },
                },
                spec: spec.clone(),
                records,
            })
        })
        .collect()
}

/// Score of one `alpha` in [`tune_alpha`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaScore {
    pub alpha: f64,
    pub threshold: f64,
    /// Mean of the per-scenario mean delays.
    pub mean_delay: f64,
    pub detections: usize,
}

/// Grid search over the adaptive censoring level: each `alpha` is calibrated
/// to `target_arl` and scored by its mean delay over `specs`.
///
/// Scenarios in which no run detects count with the horizon as their delay.
#[allow(clippy::too_many_arguments)]
pub fn tune_alpha(
    base: &DetectorConfig,
    alphas: &[f64],
    specs: &[ScenarioSpec],
    target_arl: f64,
    rel_tol: f64,
    runs: usize,
    master_seed: u64,
    options: CalibrationOptions,
) -> Result<Vec<AlphaScore>, MetricsError> {
    if alphas.is_empty() || specs.is_empty() || runs == 0 {
        return Err(MetricsError::InvalidArgument(
            "alpha grid, scenarios and runs must be nonempty".into(),
        ));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let mut config = base.clone();
            config.rule.kind = FusionKind::CensoredAdaptive { alpha };
            config.rule.validate()?;
            let cal = calibrate_threshold(&config, target_arl, rel_tol, master_seed, options)?;
            let method = CalibratedMethod {
                name: format!("alpha={alpha}"),
                config,
                threshold: Some(cal.threshold),
            };
            let mut total = 0.0;
            let mut detections = 0;
            for spec in specs {
                let records = run_spec(spec, std::slice::from_ref(&method), runs, master_seed)?;
                match average_delay(&records[0]) {
                    Ok(d) => {
                        total += d.mean;
                        detections += d.detections;
                    }
                    Err(MetricsError::NoDetections { .. }) => total += spec.horizon as f64,
                    Err(e) => return Err(e),
                }
            }
            Ok(AlphaScore {
                alpha,
                threshold: cal.threshold,
                mean_delay: total / specs.len() as f64,
                detections,
            })
        })
        .collect()
}

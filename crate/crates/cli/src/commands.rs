// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::config::{ConfigError, ExperimentConfig, PreChange};
use crate::records::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use tecusum::calibration::CalibrationError;
use tecusum::metrics::{change_point_error, compare_methods, CalibratedMethod};
use tecusum::{
    average_delay, calibrate_threshold, estimate_arl, false_alarm_curve, seed, ArlOptions,
    CurveSet, FusionError, GlobalDetector, MetricsError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("row {row}: {reason}")]
    Row { row: u64, reason: String },
    #[error("no calibration record at {0}; run `tecusum calibrate` first")]
    MissingCalibration(PathBuf),
    #[error("calibration record does not match the configuration: {0}")]
    StaleCalibration(String),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("calibration of {method} failed: {source}")]
    Calibration {
        method: String,
        source: CalibrationError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Detector(#[from] FusionError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `time` and one column per series.
fn write_curves(path: &Path, time_header: &str, curves: &CurveSet) -> Result<(), CliError> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec![time_header.to_string()];
    header.extend(curves.series.iter().map(|s| s.name.clone()));
    w.write_record(&header).map_err(csv_err)?;
    for (i, t) in curves.time.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(curves.series.iter().map(|s| s.values[i].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

pub fn calibration_path(config: &ExperimentConfig) -> PathBuf {
    config.output.join("calibration.json")
}

/// Calibrates every configured method to the target ARL2FA and writes
/// `calibration.json` and `false_alarm.csv`.
pub fn calibrate(config: &ExperimentConfig) -> Result<CalibrationFile, CliError> {
    config.validate()?;
    let cal = &config.calibration;
    let options = cal.options()?;
    let calibration_seed = seed::derive(config.seed, &[seed::CALIBRATION]);
    let verify_seed = seed::derive(config.seed, &[seed::CALIBRATION, seed::label("verify")]);
    let fa_seed = seed::derive(config.seed, &[seed::FALSE_ALARM]);
    let mut records = Vec::new();
    let mut fa = CurveSet::default();
    for (name, detector) in config.methods()? {
        let wrap = |source| CliError::Calibration {
            method: name.clone(),
            source,
        };
        let result = calibrate_threshold(
            &detector,
            cal.target_arl,
            cal.tolerance,
            calibration_seed,
            options,
        )
        .map_err(wrap)?;
        let verified = estimate_arl(
            &detector,
            result.threshold,
            verify_seed,
            ArlOptions {
                min_intervals: cal.min_intervals,
                sample_budget: (cal.budget_factor * cal.target_arl).ceil() as u64,
            },
        )
        .map_err(wrap)?;
        let curve = false_alarm_curve(
            &detector,
            result.threshold,
            cal.fa_horizon,
            cal.fa_runs,
            fa_seed,
        )
        .map_err(wrap)?;
        let mut series = curve.series.into_iter().next().expect("one series");
        let fa_probability = *series.values.last().expect("nonempty horizon");
        series.name = name.clone();
        fa.time = curve.time;
        fa.series.push(series);
        records.push(CalibrationRecord {
            rule: RuleRecord::from(&detector.rule),
            name,
            threshold: result.threshold,
            achieved_arl: result.achieved_arl.mean_run_length,
            standard_error: result.achieved_arl.standard_error,
            intervals: result.achieved_arl.intervals_observed,
            iterations: result.iterations,
            converged: result.converged,
            verified_arl: verified.mean_run_length,
            verified_standard_error: verified.standard_error,
            fa_probability,
        });
    }
    let file = CalibrationFile {
        schema_version: SCHEMA_VERSION,
        seed: config.seed,
        target_arl: cal.target_arl,
        tolerance: cal.tolerance,
        model: config.model.clone(),
        fa_horizon: cal.fa_horizon,
        fa_runs: cal.fa_runs,
        methods: records,
    };
    create_dir(&config.output)?;
    write_json(&calibration_path(config), &file)?;
    write_curves(&config.output.join("false_alarm.csv"), "t", &fa)?;
    Ok(file)
}

fn load_calibration(config: &ExperimentConfig) -> Result<CalibrationFile, CliError> {
    let path = calibration_path(config);
    if !path.exists() {
        return Err(CliError::MissingCalibration(path));
    }
    let file: CalibrationFile = read_json(&path)?;
    if file.model != config.model {
        return Err(CliError::StaleCalibration("model parameters differ".into()));
    }
    if file.target_arl != config.calibration.target_arl {
        return Err(CliError::StaleCalibration(format!(
            "target ARL {} in the record, {} in the configuration",
            file.target_arl, config.calibration.target_arl
        )));
    }
    Ok(file)
}

/// Configured methods with thresholds from `calibration.json`.
pub fn calibrated_methods(config: &ExperimentConfig) -> Result<Vec<CalibratedMethod>, CliError> {
    let file = load_calibration(config)?;
    config
        .methods()?
        .into_iter()
        .map(|(name, detector)| {
            let record = file.method(&name).ok_or_else(|| {
                CliError::StaleCalibration(format!("method {name} is not calibrated"))
            })?;
            if record.rule != RuleRecord::from(&detector.rule) {
                return Err(CliError::StaleCalibration(format!(
                    "rule of method {name} changed since calibration"
                )));
            }
            Ok(CalibratedMethod {
                name,
                config: detector,
                threshold: Some(record.threshold),
            })
        })
        .collect()
}

/// Runs every scenario against every calibrated method on shared noise and
/// writes curves and summaries.
pub fn simulate(config: &ExperimentConfig) -> Result<Summary, CliError> {
    config.validate()?;
    let methods = calibrated_methods(config)?;
    let specs = config.scenarios()?;
    let curves_dir = config.output.join("curves");
    let scenarios_dir = config.output.join("scenarios");
    create_dir(&curves_dir)?;
    create_dir(&scenarios_dir)?;
    let mut scenarios = Vec::new();
    for spec in &specs {
        let cmp = compare_methods(
            std::slice::from_ref(spec),
            &methods,
            config.runs,
            config.seed,
            config.pre_change.into(),
        )?
        .pop()
        .expect("one comparison per scenario");
        let end = (spec.exposure_end() - spec.exposure_start()) as i64;
        let summaries = methods
            .iter()
            .zip(&cmp.records)
            .map(|(m, records)| MethodSummary {
                name: m.name.clone(),
                threshold: m.threshold.expect("calibrated"),
                rate_at_end_of_exposure: cmp.curves.value_at(&m.name, end).unwrap_or(0.0),
                final_rate: cmp.curves.value_at(&m.name, i64::MAX / 2).unwrap_or(0.0),
                pre_change_alarms: records.iter().filter(|r| r.is_pre_change()).count(),
                missed: records.iter().filter(|r| r.alarm_time.is_none()).count(),
                delay: average_delay(records).ok().map(DelayRecord::from),
                change_point: change_point_error(records).map(ChangePointRecord::from),
            })
            .collect();
        let summary = ScenarioSummary {
            schema_version: SCHEMA_VERSION,
            name: spec.name.clone(),
            spec: SpecRecord::from(spec),
            runs: config.runs,
            seed: config.seed,
            pre_change: match config.pre_change {
                PreChange::Include => "include".into(),
                PreChange::Exclude => "exclude".into(),
            },
            methods: summaries,
        };
        write_curves(
            &curves_dir.join(format!("{}.csv", spec.name)),
            "t",
            &cmp.curves,
        )?;
        write_json(&scenarios_dir.join(format!("{}.json", spec.name)), &summary)?;
        scenarios.push(summary);
    }
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        seed: config.seed,
        runs: config.runs,
        target_arl: config.calibration.target_arl,
        scenarios,
    };
    write_json(&config.output.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectMode {
    /// Each method stops at its first alarm.
    #[default]
    OneShot,
    /// Each method resets its state after every alarm and keeps going.
    Cyclical,
}

#[derive(Debug, Clone, Default)]
pub struct DetectOptions {
    pub mode: DetectMode,
    /// Overrides the calibrated thresholds.
    pub threshold: Option<f64>,
    /// Restricts detection to one method.
    pub method: Option<String>,
}

fn detect_methods(
    config: &ExperimentConfig,
    options: &DetectOptions,
) -> Result<Vec<CalibratedMethod>, CliError> {
    let mut methods = match options.threshold {
        Some(h) => config
            .methods()?
            .into_iter()
            .map(|(name, detector)| CalibratedMethod {
                name,
                config: detector,
                threshold: Some(h),
            })
            .collect(),
        None => calibrated_methods(config)?,
    };
    if let Some(name) = &options.method {
        methods.retain(|m| &m.name == name);
        if methods.is_empty() {
            return Err(CliError::UnknownMethod(name.clone()));
        }
    }
    Ok(methods)
}

/// Streams CSV rows (header of sensor names, one row per sample) through
/// every selected detector and writes one JSON line per alarm to `out`.
pub fn detect<R: Read, W: Write>(
    config: &ExperimentConfig,
    options: &DetectOptions,
    input: R,
    mut out: W,
) -> Result<Vec<AlarmRecord>, CliError> {
    config.validate()?;
    let methods = detect_methods(config, options)?;
    let mut detectors = methods
        .iter()
        .map(|m| GlobalDetector::new(&m.config, m.threshold.expect("threshold set")))
        .collect::<Result<Vec<_>, _>>()?;
    let rules: Vec<RuleRecord> = methods
        .iter()
        .map(|m| RuleRecord::from(&m.config.rule))
        .collect();
    let mut done = vec![false; methods.len()];
    let mut offsets = vec![0u64; methods.len()];
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let width = config.model.sensors;
    let header_len = reader
        .headers()
        .map_err(|e| CliError::Row {
            row: 0,
            reason: e.to_string(),
        })?
        .len();
    if header_len != width {
        return Err(CliError::Row {
            row: 0,
            reason: format!("header has {header_len} columns, the model has {width} sensors"),
        });
    }
    let mut alarms = Vec::new();
    let mut values = vec![0.0; width];
    let mut record = csv::StringRecord::new();
    let mut row = 0u64;
    loop {
        row += 1;
        let more = reader.read_record(&mut record).map_err(|e| CliError::Row {
            row,
            reason: e.to_string(),
        })?;
        if !more {
            break;
        }
        if record.len() != width {
            return Err(CliError::Row {
                row,
                reason: format!("expected {width} columns, found {}", record.len()),
            });
        }
        for (i, (cell, v)) in record.iter().zip(values.iter_mut()).enumerate() {
            *v = cell
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Row {
                    row,
                    reason: format!("column {}: {cell:?} is not a finite number", i + 1),
                })?;
        }
        for (m, det) in detectors.iter_mut().enumerate() {
            if done[m] {
                continue;
            }
            let step = det.step(&values)?;
            if !step.alarm {
                continue;
            }
            let fused = det.fused();
            let alarm = AlarmRecord {
                method: methods[m].name.clone(),
                rule: rules[m].clone(),
                sample: offsets[m] + step.n,
                value: step.value,
                active_set: fused.active_set,
                nu_hat: det
                    .change_points()
                    .into_iter()
                    .map(|e| e.map(|e| offsets[m] + e.nu_hat))
                    .collect(),
            };
            let line = serde_json::to_string(&alarm).expect("alarm serialises");
            writeln!(out, "{line}").map_err(io_err(Path::new("<output>")))?;
            alarms.push(alarm);
            match options.mode {
                DetectMode::OneShot => done[m] = true,
                DetectMode::Cyclical => {
                    offsets[m] += step.n;
                    det.reset();
                }
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(alarms)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReportStatus {
    NoResults,
    Complete { cells: usize },
    Partial { cells: usize, missing: usize },
}

struct Cell {
    scenario: String,
    method: String,
    summary: Option<MethodSummary>,
    runs: usize,
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.digits$}"))
}

/// Consolidates per-scenario results under `dir` into `report.csv` and an
/// aligned table on `out`. Missing scenario files or methods are flagged per cell.
pub fn report<W: Write>(dir: &Path, mut out: W) -> Result<ReportStatus, CliError> {
    let scenarios_dir = dir.join("scenarios");
    let mut files: Vec<PathBuf> = match std::fs::read_dir(&scenarios_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    let write_out = |out: &mut W, text: &str| {
        out.write_all(text.as_bytes())
            .map_err(io_err(Path::new("<output>")))
    };
    if files.is_empty() {
        write_out(&mut out, &format!("no results in {}\n", dir.display()))?;
        return Ok(ReportStatus::NoResults);
    }
    let mut summaries = Vec::new();
    for path in &files {
        summaries.push(read_json::<ScenarioSummary>(path)?);
    }
    let calibration: Option<CalibrationFile> = {
        let path = dir.join("calibration.json");
        if path.exists() {
            Some(read_json(&path)?)
        } else {
            None
        }
    };
    let methods: Vec<String> = match &calibration {
        Some(c) => c.methods.iter().map(|m| m.name.clone()).collect(),
        None => {
            let mut seen = BTreeSet::new();
            summaries
                .iter()
                .flat_map(|s| s.methods.iter().map(|m| m.name.clone()))
                .filter(|n| seen.insert(n.clone()))
                .collect()
        }
    };
    let mut cells = Vec::new();
    for s in &summaries {
        let has_curves = dir.join("curves").join(format!("{}.csv", s.name)).exists();
        for m in &methods {
            cells.push(Cell {
                scenario: s.name.clone(),
                method: m.clone(),
                summary: s
                    .methods
                    .iter()
                    .find(|x| &x.name == m)
                    .filter(|_| has_curves)
                    .cloned(),
                runs: s.runs,
            });
        }
    }
    let header = [
        "scenario",
        "method",
        "rate_end_of_exposure",
        "mean_delay",
        "delay_se",
        "fa_rate",
        "status",
    ];
    let rows: Vec<[String; 7]> = cells
        .iter()
        .map(|c| match &c.summary {
            Some(m) => [
                c.scenario.clone(),
                c.method.clone(),
                format!("{:.4}", m.rate_at_end_of_exposure),
                fmt_opt(m.delay.as_ref().map(|d| d.mean), 2),
                fmt_opt(m.delay.as_ref().map(|d| d.standard_error), 2),
                format!("{:.4}", m.pre_change_alarms as f64 / c.runs as f64),
                "ok".into(),
            ],
            None => [
                c.scenario.clone(),
                c.method.clone(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                "missing".into(),
            ],
        })
        .collect();
    let path = dir.join("report.csv");
    let csv_err = |source| CliError::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in &rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&path))?;

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let mut table = String::new();
    let mut line = |cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(table, "{}", parts.join("  ").trim_end());
    };
    line(&header);
    for r in &rows {
        line(&r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    write_out(&mut out, &table)?;
    let missing = cells.iter().filter(|c| c.summary.is_none()).count();
    Ok(if missing == 0 {
        ReportStatus::Complete { cells: cells.len() }
    } else {
        ReportStatus::Partial {
            cells: cells.len(),
            missing,
        }
    })
}

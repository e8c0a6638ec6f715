// SPDX-License-Identifier: MIT OR Apache-2.0

//! ARL2FA estimation and threshold calibration.
//!
//! The ARL is estimated with the cyclical scheme: pure-noise data is streamed
//! through the detector and every local state is reset at each alarm, so the
//! inter-alarm intervals are i.i.d. copies of the run length from a fresh
//! start. Each interval draws its noise from its own sub-stream
//! (`derive(seed, [CALIBRATION, i])`, `i >= 1`), which makes the run length of
//! every interval a non-decreasing function of `h` for a fixed seed.
//!
//! For threshold-independent rules the fused statistic of an interval does not
//! depend on `h` either, so the run length at any `h` is the first sample at
//! which the running maximum of the statistic exceeds `h`. An
//! [`IntervalTrace`] stores the record values of that running maximum and is
//! extended lazily, so bisection re-uses every simulated sample across probes.

use crate::fusion::{CensorLevel, DetectorConfig, FusionError, FusionKind, GlobalDetector};
use crate::metrics::{CurveMetadata, CurveSet, Series};
use crate::seed::{self, SimRng};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no alarm within the budget of {budget} samples per interval; ARL is at least {lower_bound:.1}")]
    BudgetExceeded { budget: u64, lower_bound: f64 },
    #[error("target ARL {target} not bracketed after {expansions} expansions (last threshold {last_threshold})")]
    BracketNotFound {
        target: f64,
        expansions: usize,
        last_threshold: f64,
    },
    #[error(transparent)]
    Detector(#[from] FusionError),
}

/// Mean inter-alarm interval under the no-change hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArlEstimate {
    pub mean_run_length: f64,
    pub standard_error: f64,
    pub intervals_observed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArlOptions {
    pub min_intervals: usize,
    /// Samples without an alarm after which an interval is abandoned.
    pub sample_budget: u64,
}

impl Default for ArlOptions {
    fn default() -> Self {
        Self {
            min_intervals: 200,
            sample_budget: 3_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub min_intervals: usize,
    /// Per-interval sample budget as a multiple of the target ARL.
    pub budget_factor: f64,
    pub initial_threshold: f64,
    pub expansion_factor: f64,
    pub max_expansions: usize,
    pub max_iterations: usize,
    /// Fixed-point iterations for censoring levels tied to the threshold.
    pub max_level_iterations: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            min_intervals: 200,
            budget_factor: 100.0,
            initial_threshold: 1.0,
            expansion_factor: 1.5,
            max_expansions: 60,
            max_iterations: 60,
            max_level_iterations: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub threshold: f64,
    pub achieved_arl: ArlEstimate,
    pub target_arl: f64,
    /// ARL evaluations performed.
    pub iterations: usize,
    /// False when the iteration cap was hit before reaching the tolerance.
    pub converged: bool,
}

impl CalibrationResult {
    pub fn relative_error(&self) -> f64 {
        (self.achieved_arl.mean_run_length - self.target_arl).abs() / self.target_arl
    }
}

#[inline]
fn draw_null_row(models: &[crate::llr::GaussianMeanShiftModel], rng: &mut SimRng, row: &mut [f64]) {
    for (x, m) in row.iter_mut().zip(models) {
        let z: f64 = rng.sample(StandardNormal);
        *x = m.mu0() + m.sigma() * z;
    }
}

/// Record values of the running maximum of the fused statistic of one interval.
#[derive(Debug, Clone)]
pub struct IntervalTrace {
    detector: GlobalDetector,
    rng: SimRng,
    row: Vec<f64>,
    running_max: f64,
    records: Vec<(u64, f64)>,
}

impl IntervalTrace {
    pub fn new(config: &DetectorConfig, seed: u64) -> Result<Self, CalibrationError> {
        if config.rule.depends_on_threshold() {
            return Err(CalibrationError::InvalidArgument(
                "interval traces need a threshold-independent rule".into(),
            ));
        }
        let detector = GlobalDetector::tracer(config)?;
        Ok(Self {
            row: vec![0.0; detector.num_streams()],
            detector,
            rng: seed::rng(seed),
            running_max: f64::NEG_INFINITY,
            records: Vec::new(),
        })
    }

    pub fn samples(&self) -> u64 {
        self.detector.samples()
    }

    /// Simulates until the running maximum exceeds `h` or `budget` samples are used.
    pub fn extend(&mut self, h: f64, budget: u64) {
        while self.running_max <= h && self.detector.samples() < budget {
            draw_null_row(&self.detector.config().models, &mut self.rng, &mut self.row);
            let step = self
                .detector
                .step(&self.row)
                .expect("null rows are finite and of the right width");
            if step.value > self.running_max {
                self.running_max = step.value;
                self.records.push((step.n, step.value));
            }
        }
    }

    /// First sample with fused value `> h`, or `Err(samples simulated)` if
    /// none has been seen yet.
    pub fn run_length(&self, h: f64) -> Result<u64, u64> {
        let i = self.records.partition_point(|&(_, v)| v <= h);
        self.records.get(i).map(|r| r.0).ok_or(self.samples())
    }
}

enum PoolMean {
    Complete {
        estimate: ArlEstimate,
        truncated: usize,
    },
    Above,
}

/// Common-random-number pool of calibration intervals.
struct IntervalPool {
    traces: Vec<IntervalTrace>,
    budget: u64,
}

impl IntervalPool {
    fn new(
        config: &DetectorConfig,
        seed: u64,
        count: usize,
        budget: u64,
    ) -> Result<Self, CalibrationError> {
        let traces = (1..=count as u64)
            .map(|i| IntervalTrace::new(config, seed::derive(seed, &[seed::CALIBRATION, i])))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { traces, budget })
    }

    /// Mean run length at `h`. With `stop_above`, evaluation stops as soon as
    /// the mean is certain to exceed it.
    ///
    /// Intervals are extended round-robin under a doubling per-interval cap,
    /// so an overshooting probe costs about twice the stopping total.
    fn evaluate(&mut self, h: f64, stop_above: Option<f64>) -> PoolMean {
        let n = self.traces.len() as f64;
        let budget = self.budget;
        let mut cap = stop_above.map_or(budget, |l| (l.ceil() as u64).max(1));
        loop {
            let c = cap.min(budget);
            self.traces.par_iter_mut().for_each(|t| t.extend(h, c));
            let (mut sum, mut sum2, mut truncated, mut pending) = (0.0f64, 0.0f64, 0usize, 0usize);
            for t in &self.traces {
                let rl = match t.run_length(h) {
                    Ok(rl) => rl,
                    Err(seen) => {
                        truncated += 1;
                        if seen < budget {
                            pending += 1;
                        }
                        seen
                    }
                } as f64;
                sum += rl;
                sum2 += rl * rl;
            }
            if stop_above.is_some_and(|l| sum > l * n) {
                return PoolMean::Above;
            }
            if pending == 0 {
                let mean = sum / n;
                let var = ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0);
                return PoolMean::Complete {
                    estimate: ArlEstimate {
                        mean_run_length: mean,
                        standard_error: (var / n).sqrt(),
                        intervals_observed: self.traces.len(),
                    },
                    truncated,
                };
            }
            cap = cap.saturating_mul(2);
        }
    }
}

fn check_threshold(h: f64) -> Result<(), CalibrationError> {
    if h.is_finite() && h >= 0.0 {
        Ok(())
    } else {
        Err(CalibrationError::InvalidArgument(format!(
            "threshold must be finite and >= 0, got {h}"
        )))
    }
}

fn check_intervals(n: usize) -> Result<(), CalibrationError> {
    if n >= 30 {
        Ok(())
    } else {
        Err(CalibrationError::InvalidArgument(format!(
            "at least 30 intervals are required, got {n}"
        )))
    }
}

/// Replaces a threshold-relative censoring level by its absolute value at `h`.
fn resolved(config: &DetectorConfig, h: f64) -> DetectorConfig {
    let mut config = config.clone();
    if let FusionKind::CensoredFixed(level) = config.rule.kind {
        config.rule.kind = FusionKind::CensoredFixed(CensorLevel::Absolute(level.resolve(h)));
    }
    config
}

/// Cyclical-scheme ARL2FA at threshold `h`, deterministic in `seed`.
pub fn estimate_arl(
    config: &DetectorConfig,
    h: f64,
    seed: u64,
    options: ArlOptions,
) -> Result<ArlEstimate, CalibrationError> {
    check_threshold(h)?;
    check_intervals(options.min_intervals)?;
    config.validate()?;
    let mut pool = IntervalPool::new(
        &resolved(config, h),
        seed,
        options.min_intervals,
        options.sample_budget,
    )?;
    match pool.evaluate(h, None) {
        PoolMean::Complete {
            estimate,
            truncated: 0,
        } => Ok(estimate),
        PoolMean::Complete { estimate, .. } => Err(CalibrationError::BudgetExceeded {
            budget: options.sample_budget,
            lower_bound: estimate.mean_run_length,
        }),
        PoolMean::Above => unreachable!("no early stop requested"),
    }
}

enum Probe {
    Below,
    Within(ArlEstimate),
    Above,
}

/// Searches `h` such that the ARL2FA is within `rel_tol` of `target_arl`.
///
/// Geometric expansion brackets the target, then bisection narrows it; all
/// probes share the same intervals. If the iteration cap is reached, the
/// bracket midpoint is returned with `converged = false`.
pub fn calibrate_threshold(
    config: &DetectorConfig,
    target_arl: f64,
    rel_tol: f64,
    seed: u64,
    options: CalibrationOptions,
) -> Result<CalibrationResult, CalibrationError> {
    if !(target_arl.is_finite() && target_arl > 0.0) {
        return Err(CalibrationError::InvalidArgument(format!(
            "target ARL must be positive, got {target_arl}"
        )));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(CalibrationError::InvalidArgument(format!(
            "relative tolerance must lie in (0, 1), got {rel_tol}"
        )));
    }
    if !(options.expansion_factor > 1.0 && options.initial_threshold > 0.0) {
        return Err(CalibrationError::InvalidArgument(
            "expansion factor must exceed 1 and the initial threshold must be positive".into(),
        ));
    }
    check_intervals(options.min_intervals)?;
    config.validate()?;
    match config.rule.kind {
        FusionKind::CensoredFixed(CensorLevel::ThresholdFraction(fraction)) => {
            calibrate_relative_level(config, fraction, target_arl, rel_tol, seed, options)
        }
        _ => calibrate_fixed_rule(config, target_arl, rel_tol, seed, options),
    }
}

fn calibrate_fixed_rule(
    config: &DetectorConfig,
    target: f64,
    rel_tol: f64,
    seed: u64,
    options: CalibrationOptions,
) -> Result<CalibrationResult, CalibrationError> {
    let budget = (options.budget_factor * target).ceil().max(1.0) as u64;
    let mut pool = IntervalPool::new(config, seed, options.min_intervals, budget)?;
    let mut iterations = 0;
    let mut probe = |h: f64| {
        iterations += 1;
        match pool.evaluate(h, Some(target * (1.0 + rel_tol))) {
            PoolMean::Above => Probe::Above,
            PoolMean::Complete { estimate, .. } => {
                let r = estimate.mean_run_length / target - 1.0;
                if r.abs() <= rel_tol {
                    Probe::Within(estimate)
                } else if r < 0.0 {
                    Probe::Below
                } else {
                    Probe::Above
                }
            }
        }
    };
    let done = |threshold, achieved_arl, iterations, converged| CalibrationResult {
        threshold,
        achieved_arl,
        target_arl: target,
        iterations,
        converged,
    };

    let mut h = options.initial_threshold;
    let first = probe(h);
    let (mut lo, mut hi);
    match first {
        Probe::Within(est) => return Ok(done(h, est, 1, true)),
        Probe::Below => {
            lo = h;
            let mut expansions = 0;
            loop {
                if expansions == options.max_expansions {
                    return Err(CalibrationError::BracketNotFound {
                        target,
                        expansions,
                        last_threshold: h,
                    });
                }
                expansions += 1;
                h *= options.expansion_factor;
                match probe(h) {
                    Probe::Within(est) => return Ok(done(h, est, 1 + expansions, true)),
                    Probe::Below => lo = h,
                    Probe::Above => {
                        hi = h;
                        break;
                    }
                }
            }
        }
        Probe::Above => {
            hi = h;
            let mut expansions = 0;
            loop {
                if expansions == options.max_expansions || h < 1e-12 {
                    return Err(CalibrationError::BracketNotFound {
                        target,
                        expansions,
                        last_threshold: h,
                    });
                }
                expansions += 1;
                h /= options.expansion_factor;
                match probe(h) {
                    Probe::Within(est) => return Ok(done(h, est, 1 + expansions, true)),
                    Probe::Above => hi = h,
                    Probe::Below => {
                        lo = h;
                        break;
                    }
                }
            }
        }
    }

    for _ in 0..options.max_iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match probe(mid) {
            Probe::Within(est) => return Ok(done(mid, est, iterations, true)),
            Probe::Below => lo = mid,
            Probe::Above => hi = mid,
        }
    }
    let mid = 0.5 * (lo + hi);
    let estimate = match pool.evaluate(mid, None) {
        PoolMean::Complete { estimate, .. } => estimate,
        PoolMean::Above => unreachable!("no early stop requested"),
    };
    Ok(done(mid, estimate, iterations + 1, false))
}

/// Fixed censoring at `c = fraction * h`: iterate `h <- calibrate(c = fraction * h)`.
fn calibrate_relative_level(
    config: &DetectorConfig,
    fraction: f64,
    target: f64,
    rel_tol: f64,
    seed: u64,
    options: CalibrationOptions,
) -> Result<CalibrationResult, CalibrationError> {
    let with_level = |c: f64| {
        let mut cfg = config.clone();
        cfg.rule.kind = FusionKind::CensoredFixed(CensorLevel::Absolute(c));
        cfg
    };
    // Start from the max rule, which is what censoring tends to as c grows.
    let mut start = config.clone();
    start.rule.kind = FusionKind::Max;
    let mut result = calibrate_fixed_rule(&start, target, rel_tol, seed, options)?;
    let mut iterations = result.iterations;
    let mut converged = false;
    for _ in 0..options.max_level_iterations {
        let previous = result.threshold;
        result = calibrate_fixed_rule(
            &with_level(fraction * previous),
            target,
            rel_tol,
            seed,
            options,
        )?;
        iterations += result.iterations;
        if (result.threshold - previous).abs() <= 1e-3 * previous {
            converged = result.converged;
            break;
        }
    }
    // Re-estimate with the level tied exactly to the final threshold.
    let budget = (options.budget_factor * target).ceil().max(1.0) as u64;
    let mut pool = IntervalPool::new(
        &resolved(config, result.threshold),
        seed,
        options.min_intervals,
        budget,
    )?;
    let achieved = match pool.evaluate(result.threshold, None) {
        PoolMean::Complete { estimate, .. } => estimate,
        PoolMean::Above => unreachable!("no early stop requested"),
    };
    Ok(CalibrationResult {
        threshold: result.threshold,
        converged: converged && (achieved.mean_run_length / target - 1.0).abs() <= rel_tol,
        achieved_arl: achieved,
        target_arl: target,
        iterations: iterations + 1,
    })
}

/// One interval from a fresh detector: samples until the first alarm.
pub fn fresh_interval(
    config: &DetectorConfig,
    h: f64,
    rng: &mut SimRng,
    budget: u64,
) -> Result<Option<u64>, CalibrationError> {
    let mut detector = GlobalDetector::new(config, h)?;
    let mut row = vec![0.0; detector.num_streams()];
    while detector.samples() < budget {
        draw_null_row(&config.models, rng, &mut row);
        if detector.step(&row)?.alarm {
            return Ok(Some(detector.samples()));
        }
    }
    Ok(None)
}

/// Continuous pure-noise stream with a reset of every local state at each alarm.
#[derive(Debug, Clone)]
pub struct CyclicalRun {
    detector: GlobalDetector,
    rng: SimRng,
    row: Vec<f64>,
}

impl CyclicalRun {
    pub fn new(config: &DetectorConfig, h: f64, seed: u64) -> Result<Self, CalibrationError> {
        check_threshold(h)?;
        let detector = GlobalDetector::new(config, h)?;
        Ok(Self {
            row: vec![0.0; detector.num_streams()],
            detector,
            rng: seed::rng(seed),
        })
    }

    /// Noise generator state at the current position of the stream.
    pub fn rng(&self) -> &SimRng {
        &self.rng
    }

    /// Length of the next inter-alarm interval, or `None` if `budget` samples
    /// pass without an alarm.
    pub fn next_interval(&mut self, budget: u64) -> Option<u64> {
        while self.detector.samples() < budget {
            draw_null_row(&self.detector.config().models, &mut self.rng, &mut self.row);
            let step = self
                .detector
                .step(&self.row)
                .expect("null rows are well formed");
            if step.alarm {
                self.detector.reset();
                return Some(step.n);
            }
        }
        None
    }
}

fn one_shot_alarm(
    config: &DetectorConfig,
    h: f64,
    horizon: u64,
    seed: u64,
) -> Result<Option<u64>, CalibrationError> {
    let mut rng = seed::rng(seed);
    fresh_interval(config, h, &mut rng, horizon)
}

/// Fraction of one-shot runs on pure noise that alarmed at or before each
/// `t = 1..=horizon`.
pub fn false_alarm_curve(
    config: &DetectorConfig,
    h: f64,
    horizon: u64,
    runs: usize,
    seed: u64,
) -> Result<CurveSet, CalibrationError> {
    check_threshold(h)?;
    if runs < 100 {
        return Err(CalibrationError::InvalidArgument(format!(
            "at least 100 runs are required, got {runs}"
        )));
    }
    let alarms = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            one_shot_alarm(
                config,
                h,
                horizon,
                seed::derive(seed, &[seed::FALSE_ALARM, r]),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut counts = vec![0u64; horizon as usize + 1];
    for t in alarms.into_iter().flatten() {
        counts[t as usize] += 1;
    }
    let mut acc = 0;
    let values = counts[1..]
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / runs as f64
        })
        .collect();
    Ok(CurveSet {
        time: (1..=horizon as i64).collect(),
        series: vec![Series {
            name: "false_alarm".into(),
            values,
        }],
        metadata: CurveMetadata {
            label: "false-alarm".into(),
            runs,
            thresholds: vec![h],
            target_arl: None,
        },
    })
}

/// Threshold giving an empirical probability `probability` of at least one
/// alarm within `horizon` samples of pure noise.
pub fn threshold_for_false_alarm_probability(
    config: &DetectorConfig,
    horizon: u64,
    probability: f64,
    runs: usize,
    seed: u64,
) -> Result<f64, CalibrationError> {
    if !(probability > 0.0 && probability < 1.0) || runs < 100 {
        return Err(CalibrationError::InvalidArgument(
            "probability must lie in (0, 1) with at least 100 runs".into(),
        ));
    }
    config.validate()?;
    let mut maxima = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut trace =
                IntervalTrace::new(config, seed::derive(seed, &[seed::FALSE_ALARM, r]))?;
            trace.extend(f64::INFINITY, horizon);
            Ok(trace.running_max)
        })
        .collect::<Result<Vec<f64>, CalibrationError>>()?;
    maxima.sort_by(f64::total_cmp);
    let exceed = (probability * runs as f64).floor() as usize;
    Ok(maxima[runs - exceed - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{FusionRule, LocalStatistic};
    use crate::llr::GaussianMeanShiftModel;

    fn single(statistic: LocalStatistic) -> DetectorConfig {
        DetectorConfig::homogeneous(
            GaussianMeanShiftModel::new(0.0, 0.4, 1.0).unwrap(),
            1,
            FusionRule::new(FusionKind::Sum, statistic).unwrap(),
        )
    }

    fn opts(n: usize, budget: u64) -> ArlOptions {
        ArlOptions {
            min_intervals: n,
            sample_budget: budget,
        }
    }

    #[test]
    fn zero_threshold_alarms_almost_immediately() {
        let est = estimate_arl(&single(LocalStatistic::Cusum), 0.0, 1, opts(200, 1000)).unwrap();
        // P(first increment > 0) = P(x > 0.2) ~ 0.42 under N(0, 1).
        assert!(
            est.mean_run_length >= 1.0 && est.mean_run_length < 5.0,
            "{est:?}"
        );
        assert_eq!(est.intervals_observed, 200);
    }

    #[test]
    fn arl_is_monotone_in_threshold_under_common_noise() {
        let cfg = single(LocalStatistic::Cusum);
        let mut prev: Option<ArlEstimate> = None;
        for h in [1.0, 2.0, 3.0, 4.0, 5.0] {
            let est = estimate_arl(&cfg, h, 9, opts(200, 1_000_000)).unwrap();
            if let Some(p) = prev {
                assert!(est.mean_run_length >= p.mean_run_length - 2.0 * est.standard_error);
                // Per-interval run lengths are non-decreasing in h, hence so is the mean.
                assert!(est.mean_run_length >= p.mean_run_length);
            }
            prev = Some(est);
        }
    }

    #[test]
    fn budget_exceeded_reports_lower_bound() {
        let err = estimate_arl(&single(LocalStatistic::Cusum), 50.0, 1, opts(30, 500)).unwrap_err();
        match err {
            CalibrationError::BudgetExceeded {
                budget,
                lower_bound,
            } => {
                assert_eq!(budget, 500);
                assert!(lower_bound > 0.0 && lower_bound <= 500.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let cfg = single(LocalStatistic::Cusum);
        assert!(estimate_arl(&cfg, -1.0, 1, opts(200, 10)).is_err());
        assert!(estimate_arl(&cfg, 1.0, 1, opts(10, 10)).is_err());
        let o = CalibrationOptions::default();
        assert!(calibrate_threshold(&cfg, 0.0, 0.05, 1, o).is_err());
        assert!(calibrate_threshold(&cfg, 100.0, 1.5, 1, o).is_err());
        assert!(false_alarm_curve(&cfg, 1.0, 10, 50, 1).is_err());
    }

    #[test]
    fn estimation_is_deterministic() {
        let cfg = single(LocalStatistic::TeCusum);
        let a = estimate_arl(&cfg, 3.0, 4, opts(100, 100_000)).unwrap();
        let b = estimate_arl(&cfg, 3.0, 4, opts(100, 100_000)).unwrap();
        assert_eq!(a, b);
        let c = estimate_arl(&cfg, 3.0, 5, opts(100, 100_000)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cusum_and_tecusum_have_identical_univariate_arl() {
        let a = estimate_arl(&single(LocalStatistic::Cusum), 4.0, 6, opts(100, 1_000_000)).unwrap();
        let b = estimate_arl(
            &single(LocalStatistic::TeCusum),
            4.0,
            6,
            opts(100, 1_000_000),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn calibration_hits_target_and_is_deterministic() {
        let cfg = single(LocalStatistic::Cusum);
        let o = CalibrationOptions::default();
        let a = calibrate_threshold(&cfg, 2_000.0, 0.05, 3, o).unwrap();
        assert!(a.converged);
        assert!(a.relative_error() <= 0.05, "{a:?}");
        let b = calibrate_threshold(&cfg, 2_000.0, 0.05, 3, o).unwrap();
        assert_eq!(a, b);
        let doubled = calibrate_threshold(&cfg, 4_000.0, 0.05, 3, o).unwrap();
        assert!(doubled.threshold > a.threshold);
    }

    #[test]
    fn calibration_bracket_failure_is_reported() {
        let cfg = single(LocalStatistic::Cusum);
        let o = CalibrationOptions {
            max_expansions: 2,
            ..CalibrationOptions::default()
        };
        assert!(matches!(
            calibrate_threshold(&cfg, 1e6, 0.05, 1, o),
            Err(CalibrationError::BracketNotFound { expansions: 2, .. })
        ));
    }

    #[test]
    fn threshold_relative_censoring_converges() {
        let cfg = DetectorConfig::homogeneous(
            GaussianMeanShiftModel::new(0.0, 0.5, 1.0).unwrap(),
            4,
            FusionRule::new(
                FusionKind::CensoredFixed(CensorLevel::ThresholdFraction(0.6)),
                LocalStatistic::Cusum,
            )
            .unwrap(),
        );
        let r = calibrate_threshold(&cfg, 1_000.0, 0.05, 2, CalibrationOptions::default()).unwrap();
        assert!(r.relative_error() <= 0.05, "{r:?}");
    }

    #[test]
    fn cyclical_intervals_restart_from_a_fresh_state() {
        let cfg = single(LocalStatistic::TeCusum);
        let mut run = CyclicalRun::new(&cfg, 3.0, 17).unwrap();
        let mut intervals = Vec::new();
        for _ in 0..20 {
            // Replaying the noise from the reset point through a brand-new
            // detector reproduces the interval exactly.
            let mut replay = run.rng().clone();
            let expected = fresh_interval(&cfg, 3.0, &mut replay, 1_000_000).unwrap();
            let got = run.next_interval(1_000_000);
            assert_eq!(got, expected);
            intervals.push(got.unwrap());
        }
        assert!(intervals.len() >= 2);
    }

    #[test]
    fn false_alarm_curve_is_a_cdf() {
        let cfg = single(LocalStatistic::Cusum);
        let curve = false_alarm_curve(&cfg, 3.0, 500, 200, 2).unwrap();
        let v = &curve.series[0].values;
        assert_eq!(v.len(), 500);
        assert!(v[0] >= 0.0 && v.windows(2).all(|w| w[1] >= w[0]) && v[499] <= 1.0);
        assert_eq!(curve.time[0], 1);
    }

    #[test]
    fn false_alarm_quantile_threshold() {
        let cfg = single(LocalStatistic::Cusum);
        let h = threshold_for_false_alarm_probability(&cfg, 300, 0.1, 1000, 3).unwrap();
        let curve = false_alarm_curve(&cfg, h, 300, 1000, 3).unwrap();
        // Same seeds: exactly floor(0.1 * 1000) runs exceed h.
        assert!(curve.series[0].values[299] <= 0.1);
        assert!(curve.series[0].values[299] >= 0.09);
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Aggregation of per-stream statistics into one global statistic.
//!
//! With local values `v_1..v_L` (one of `W`, `G` or `Z` per stream):
//!
//! | rule                | global statistic                                   |
//! |---------------------|----------------------------------------------------|
//! | sum                 | `(1/L) sum v_l`                                    |
//! | max                 | `max v_l`                                          |
//! | censored, fixed `c` | mean of `{v_l : v_l >= c}`                         |
//! | censored, adaptive  | mean of `{v_l : v_l >= alpha * max v}`             |
//!
//! Censored means are normalised by the number of surviving streams. When no
//! stream survives (only possible when every value is below `c`, or when all
//! values are negative and `alpha < 1`), the statistic falls back to the max.

use crate::llr::GaussianMeanShiftModel;
use crate::local::{ChangePointEstimate, FmaState, StateError, TeCusumState};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("no local values to fuse")]
    Empty,
    #[error("expected {expected} values per sample, got {got}")]
    Width { expected: usize, got: usize },
    #[error("non-finite value {value} for stream {stream}")]
    NonFinite { stream: usize, value: f64 },
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("censoring level must not be NaN")]
    CensorLevel,
    #[error("threshold must not be NaN")]
    Threshold,
    #[error("detector needs at least one stream")]
    NoStreams,
    #[error("detector already alarmed at sample {0}; reset it to continue")]
    AlreadyAlarmed(u64),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Per-stream statistic fed to the fusion rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalStatistic {
    Cusum,
    TeCusum,
    Fma { window: usize },
}

impl LocalStatistic {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Cusum => "cusum",
            Self::TeCusum => "te-cusum",
            Self::Fma { .. } => "fma",
        }
    }
}

/// Fixed censoring level, either absolute or a fraction of the detection threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CensorLevel {
    Absolute(f64),
    ThresholdFraction(f64),
}

impl CensorLevel {
    pub fn resolve(&self, threshold: f64) -> f64 {
        match *self {
            Self::Absolute(c) => c,
            Self::ThresholdFraction(f) => f * threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FusionKind {
    Sum,
    Max,
    CensoredFixed(CensorLevel),
    CensoredAdaptive { alpha: f64 },
}

impl FusionKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sum => "sum",
            Self::Max => "max",
            Self::CensoredFixed(_) => "censored-fixed",
            Self::CensoredAdaptive { .. } => "censored-adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionRule {
    pub kind: FusionKind,
    pub statistic: LocalStatistic,
}

impl FusionRule {
    pub fn new(kind: FusionKind, statistic: LocalStatistic) -> Result<Self, FusionError> {
        let rule = Self { kind, statistic };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        match self.kind {
            FusionKind::CensoredAdaptive { alpha } if !(0.0..=1.0).contains(&alpha) => {
                return Err(FusionError::Alpha(alpha))
            }
            FusionKind::CensoredFixed(CensorLevel::Absolute(c))
            | FusionKind::CensoredFixed(CensorLevel::ThresholdFraction(c))
                if c.is_nan() =>
            {
                return Err(FusionError::CensorLevel)
            }
            _ => {}
        }
        if let LocalStatistic::Fma { window: 0 } = self.statistic {
            return Err(StateError::ZeroWindow.into());
        }
        Ok(())
    }

    /// Whether the global statistic depends on the detection threshold.
    pub fn depends_on_threshold(&self) -> bool {
        matches!(
            self.kind,
            FusionKind::CensoredFixed(CensorLevel::ThresholdFraction(_))
        )
    }
}

/// A named detector rule, e.g. one curve in a comparison figure.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub name: String,
    pub rule: FusionRule,
}

impl Method {
    pub fn new(name: impl Into<String>, rule: FusionRule) -> Self {
        Self {
            name: name.into(),
            rule,
        }
    }

    /// The six methods of the validation experiments: SC, MC, cSC, cSTEC,
    /// cFMA50 and cFMA200, the censored ones sharing one `alpha`.
    pub fn validation_set(alpha: f64) -> Vec<Method> {
        use FusionKind::*;
        use LocalStatistic::*;
        let adaptive = CensoredAdaptive { alpha };
        let rule = |kind, statistic| FusionRule { kind, statistic };
        vec![
            Method::new("SC", rule(Sum, Cusum)),
            Method::new("MC", rule(Max, Cusum)),
            Method::new("cSC", rule(adaptive, Cusum)),
            Method::new("cSTEC", rule(adaptive, TeCusum)),
            Method::new("cFMA50", rule(adaptive, Fma { window: 50 })),
            Method::new("cFMA200", rule(adaptive, Fma { window: 200 })),
        ]
    }
}

/// A fused value and the streams that contributed to it.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedStatistic {
    pub value: f64,
    pub active_set: Vec<usize>,
}

fn check_values(values: &[f64]) -> Result<(), FusionError> {
    if values.is_empty() {
        return Err(FusionError::Empty);
    }
    match values.iter().position(|v| v.is_nan()) {
        Some(stream) => Err(FusionError::NonFinite {
            stream,
            value: values[stream],
        }),
        None => Ok(()),
    }
}

#[inline]
fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[inline]
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[inline]
fn mean_all(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, &v| acc + v) / values.len() as f64
}

#[inline]
fn censored_mean(values: &[f64], level: f64) -> f64 {
    let (sum, count) = values
        .iter()
        .filter(|&&v| v >= level)
        .fold((0.0, 0usize), |(s, k), &v| (s + v, k + 1));
    if count == 0 {
        max_of(values)
    } else {
        sum / count as f64
    }
}

/// `alpha * max`, or no censoring at all when `alpha = 0`.
#[inline]
fn adaptive_level(values: &[f64], alpha: f64) -> f64 {
    if alpha == 0.0 {
        f64::NEG_INFINITY
    } else {
        alpha * max_of(values)
    }
}

fn censored(values: &[f64], level: f64) -> FusedStatistic {
    let active_set: Vec<usize> = (0..values.len()).filter(|&i| values[i] >= level).collect();
    if active_set.is_empty() {
        FusedStatistic {
            value: max_of(values),
            active_set: vec![argmax(values)],
        }
    } else {
        FusedStatistic {
            value: censored_mean(values, level),
            active_set,
        }
    }
}

/// `(1/L) sum v_l`.
pub fn fuse_sum(values: &[f64]) -> Result<FusedStatistic, FusionError> {
    check_values(values)?;
    Ok(FusedStatistic {
        value: mean_all(values),
        active_set: (0..values.len()).collect(),
    })
}

/// `max v_l`; the active set is the (first) maximiser.
pub fn fuse_max(values: &[f64]) -> Result<FusedStatistic, FusionError> {
    check_values(values)?;
    let i = argmax(values);
    Ok(FusedStatistic {
        value: values[i],
        active_set: vec![i],
    })
}

/// Mean of the values `>= c`.
pub fn fuse_censored_fixed(values: &[f64], c: f64) -> Result<FusedStatistic, FusionError> {
    check_values(values)?;
    if c.is_nan() {
        return Err(FusionError::CensorLevel);
    }
    Ok(censored(values, c))
}

/// Mean of the values `>= alpha * max`; `alpha = 0` keeps every value.
pub fn fuse_censored_adaptive(values: &[f64], alpha: f64) -> Result<FusedStatistic, FusionError> {
    check_values(values)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FusionError::Alpha(alpha));
    }
    Ok(censored(values, adaptive_level(values, alpha)))
}

/// A fusion rule with its censoring level resolved against a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Aggregator {
    Sum,
    Max,
    Fixed(f64),
    Adaptive(f64),
}

impl Aggregator {
    fn new(kind: FusionKind, threshold: f64) -> Self {
        match kind {
            FusionKind::Sum => Self::Sum,
            FusionKind::Max => Self::Max,
            FusionKind::CensoredFixed(level) => Self::Fixed(level.resolve(threshold)),
            FusionKind::CensoredAdaptive { alpha } => Self::Adaptive(alpha),
        }
    }

    #[inline]
    fn value(&self, values: &[f64]) -> f64 {
        match *self {
            Self::Sum => mean_all(values),
            Self::Max => max_of(values),
            Self::Fixed(c) => censored_mean(values, c),
            Self::Adaptive(alpha) => censored_mean(values, adaptive_level(values, alpha)),
        }
    }

    fn fuse(&self, values: &[f64]) -> FusedStatistic {
        match *self {
            Self::Sum => FusedStatistic {
                value: mean_all(values),
                active_set: (0..values.len()).collect(),
            },
            Self::Max => {
                let i = argmax(values);
                FusedStatistic {
                    value: values[i],
                    active_set: vec![i],
                }
            }
            Self::Fixed(c) => censored(values, c),
            Self::Adaptive(alpha) => censored(values, adaptive_level(values, alpha)),
        }
    }
}

/// Per-stream recursions. The TE-CUSUM state (which embeds the CUSUM state)
/// is always kept so change-point estimates are available for every rule.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    te: TeCusumState,
    fma: Option<FmaState>,
}

impl StreamState {
    fn new(statistic: LocalStatistic) -> Result<Self, FusionError> {
        let fma = match statistic {
            LocalStatistic::Fma { window } => Some(FmaState::new(window)?),
            _ => None,
        };
        Ok(Self {
            te: TeCusumState::new(),
            fma,
        })
    }

    #[inline]
    fn update(&mut self, statistic: LocalStatistic, inc: f64) -> f64 {
        let g = self.te.update(inc);
        match (statistic, &mut self.fma) {
            (LocalStatistic::Cusum, _) => self.te.w(),
            (LocalStatistic::TeCusum, _) => g,
            (LocalStatistic::Fma { .. }, Some(fma)) => fma.update(inc),
            (LocalStatistic::Fma { .. }, None) => unreachable!("FMA stream without a window"),
        }
    }

    pub fn te_cusum(&self) -> &TeCusumState {
        &self.te
    }

    pub fn fma(&self) -> Option<&FmaState> {
        self.fma.as_ref()
    }

    /// Reals held for this stream.
    pub fn stored_reals(&self) -> usize {
        TeCusumState::STORED_REALS + self.fma.as_ref().map_or(0, FmaState::stored_reals)
    }

    fn reset(&mut self) {
        self.te.reset();
        if let Some(fma) = &mut self.fma {
            fma.reset();
        }
    }
}

/// Observation models (one per stream) and the fusion rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub models: Vec<GaussianMeanShiftModel>,
    pub rule: FusionRule,
}

impl DetectorConfig {
    /// `streams` copies of the same model.
    pub fn homogeneous(model: GaussianMeanShiftModel, streams: usize, rule: FusionRule) -> Self {
        Self {
            models: vec![model; streams],
            rule,
        }
    }

    pub fn num_streams(&self) -> usize {
        self.models.len()
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if self.models.is_empty() {
            return Err(FusionError::NoStreams);
        }
        self.rule.validate()
    }
}

/// Result of feeding one sample vector to a [`GlobalDetector`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    /// 1-based sample index.
    pub n: u64,
    pub value: f64,
    /// True on the sample where the fused value first exceeds the threshold.
    pub alarm: bool,
}

/// L local recursions, a fusion rule and a threshold `h`.
///
/// The alarm is raised at the first sample whose fused value is `> h`. After
/// an alarm, [`GlobalDetector::reset`] must be called before stepping again.
#[derive(Debug, Clone)]
pub struct GlobalDetector {
    config: DetectorConfig,
    aggregator: Aggregator,
    threshold: f64,
    streams: Vec<StreamState>,
    values: Vec<f64>,
    n: u64,
    last: f64,
    alarm: Option<u64>,
}

impl GlobalDetector {
    pub fn new(config: &DetectorConfig, threshold: f64) -> Result<Self, FusionError> {
        config.validate()?;
        if threshold.is_nan() {
            return Err(FusionError::Threshold);
        }
        let streams = (0..config.num_streams())
            .map(|_| StreamState::new(config.rule.statistic))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            aggregator: Aggregator::new(config.rule.kind, threshold),
            config: config.clone(),
            threshold,
            values: vec![0.0; streams.len()],
            streams,
            n: 0,
            last: 0.0,
            alarm: None,
        })
    }

    /// A detector that never alarms; used to trace the fused statistic.
    pub fn tracer(config: &DetectorConfig) -> Result<Self, FusionError> {
        Self::new(config, f64::INFINITY)
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn num_streams(&self) -> usize {
        self.streams.len()
    }

    pub fn samples(&self) -> u64 {
        self.n
    }

    pub fn alarm(&self) -> Option<u64> {
        self.alarm
    }

    /// Fused value after the last step (0 before any sample).
    pub fn value(&self) -> f64 {
        self.last
    }

    /// Local statistic per stream after the last step.
    pub fn local_values(&self) -> &[f64] {
        &self.values
    }

    pub fn streams(&self) -> &[StreamState] {
        &self.streams
    }

    /// Fused value with its active set, recomputed from the current local values.
    pub fn fused(&self) -> FusedStatistic {
        self.aggregator.fuse(&self.values)
    }

    /// Per-stream change-point estimates (`None` before the first sample).
    pub fn change_points(&self) -> Vec<Option<ChangePointEstimate>> {
        self.streams
            .iter()
            .map(|s| s.te.estimate_change_point().ok())
            .collect()
    }

    /// Reals held across all streams.
    pub fn stored_reals(&self) -> usize {
        self.streams.iter().map(StreamState::stored_reals).sum()
    }

    /// Feeds one observation per stream.
    pub fn step(&mut self, observations: &[f64]) -> Result<Step, FusionError> {
        self.check_width(observations.len())?;
        if let Some(stream) = observations.iter().position(|x| !x.is_finite()) {
            return Err(FusionError::NonFinite {
                stream,
                value: observations[stream],
            });
        }
        Ok(self.advance(|models, i| models[i].llr_value(observations[i])))
    }

    /// Feeds one log-likelihood ratio increment per stream, bypassing the models.
    pub fn step_increments(&mut self, increments: &[f64]) -> Result<Step, FusionError> {
        self.check_width(increments.len())?;
        if let Some(stream) = increments.iter().position(|x| !x.is_finite()) {
            return Err(FusionError::NonFinite {
                stream,
                value: increments[stream],
            });
        }
        Ok(self.advance(|_, i| increments[i]))
    }

    fn check_width(&self, got: usize) -> Result<(), FusionError> {
        if let Some(at) = self.alarm {
            return Err(FusionError::AlreadyAlarmed(at));
        }
        if got != self.streams.len() {
            return Err(FusionError::Width {
                expected: self.streams.len(),
                got,
            });
        }
        Ok(())
    }

    #[inline]
    fn advance(&mut self, increment: impl Fn(&[GaussianMeanShiftModel], usize) -> f64) -> Step {
        let statistic = self.config.rule.statistic;
        for (i, (stream, value)) in self
            .streams
            .iter_mut()
            .zip(self.values.iter_mut())
            .enumerate()
        {
            *value = stream.update(statistic, increment(&self.config.models, i));
        }
        self.n += 1;
        self.last = self.aggregator.value(&self.values);
        let alarm = self.last > self.threshold;
        if alarm {
            self.alarm = Some(self.n);
        }
        Step {
            n: self.n,
            value: self.last,
            alarm,
        }
    }

    /// Returns every stream to its initial state and clears the alarm.
    pub fn reset(&mut self) {
        for s in &mut self.streams {
            s.reset();
        }
        self.values.fill(0.0);
        self.n = 0;
        self.last = 0.0;
        self.alarm = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn model() -> GaussianMeanShiftModel {
        GaussianMeanShiftModel::new(0.0, 0.4, 1.0).unwrap()
    }

    fn rule(kind: FusionKind, statistic: LocalStatistic) -> FusionRule {
        FusionRule::new(kind, statistic).unwrap()
    }

    const V: [f64; 3] = [10.0, 6.0, 1.0];

    #[test]
    fn rule_examples() {
        assert!((fuse_sum(&V).unwrap().value - 17.0 / 3.0).abs() < 1e-15);
        assert_eq!(fuse_sum(&[0.0; 4]).unwrap().value, 0.0);
        let max = fuse_max(&V).unwrap();
        assert_eq!((max.value, max.active_set), (10.0, vec![0]));
        assert_eq!(fuse_max(&[-2.5]).unwrap().value, -2.5);
        let fixed = fuse_censored_fixed(&V, 5.0).unwrap();
        assert_eq!((fixed.value, fixed.active_set), (8.0, vec![0, 1]));
        assert_eq!(
            fuse_censored_fixed(&V, -1.0).unwrap(),
            fuse_sum(&V).unwrap()
        );
        let adaptive = fuse_censored_adaptive(&V, 0.6).unwrap();
        assert_eq!((adaptive.value, adaptive.active_set), (8.0, vec![0, 1]));
        assert_eq!(fuse_censored_adaptive(&V, 1.0).unwrap().value, 10.0);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        assert_eq!(fuse_sum(&[]), Err(FusionError::Empty));
        assert_eq!(fuse_max(&[]), Err(FusionError::Empty));
        assert_eq!(fuse_censored_fixed(&[], 1.0), Err(FusionError::Empty));
        assert_eq!(
            fuse_censored_adaptive(&V, 1.5),
            Err(FusionError::Alpha(1.5))
        );
        assert!(fuse_sum(&[1.0, f64::NAN]).is_err());
        assert!(FusionRule::new(
            FusionKind::CensoredAdaptive { alpha: -0.1 },
            LocalStatistic::Cusum
        )
        .is_err());
        assert!(FusionRule::new(FusionKind::Sum, LocalStatistic::Fma { window: 0 }).is_err());
    }

    #[test]
    fn empty_active_set_falls_back_to_max() {
        let v = [-3.0, -1.0, -2.0];
        let f = fuse_censored_adaptive(&v, 0.5).unwrap();
        assert_eq!((f.value, f.active_set), (-1.0, vec![1]));
        assert_eq!(fuse_censored_fixed(&v, 0.0).unwrap().value, -1.0);
    }

    #[test]
    fn alpha_zero_keeps_negative_values() {
        let v = [4.0, -1.0, 2.0];
        let f = fuse_censored_adaptive(&v, 0.0).unwrap();
        assert_eq!((f.value, f.active_set), (5.0 / 3.0, vec![0, 1, 2]));
        assert_eq!(
            fuse_censored_adaptive(&[-3.0, -1.0, -2.0], 0.0)
                .unwrap()
                .value,
            -2.0
        );
    }

    #[test]
    fn single_stream_tecusum_sum_alarms_with_univariate_cusum() {
        let m = model();
        let config =
            DetectorConfig::homogeneous(m, 1, rule(FusionKind::Sum, LocalStatistic::TeCusum));
        let h = 6.0;
        let mut det = GlobalDetector::new(&config, h).unwrap();
        let mut cusum = crate::local::CusumState::new();
        let mut rng = seed::rng(77);
        let (mut global, mut univariate) = (None, None);
        for n in 1..=20_000u64 {
            let x = if n > 3000 { 0.4 } else { 0.0 } + rng.sample::<f64, _>(StandardNormal);
            if univariate.is_none() && cusum.update(m.llr_value(x)) > h {
                univariate = Some(n);
            }
            if global.is_none() && det.step(&[x]).unwrap().alarm {
                global = Some(n);
            }
            if global.is_some() && univariate.is_some() {
                break;
            }
        }
        assert!(global.is_some());
        assert_eq!(global, univariate);
    }

    #[test]
    fn step_rejects_bad_rows_and_post_alarm_steps() {
        let config =
            DetectorConfig::homogeneous(model(), 3, rule(FusionKind::Max, LocalStatistic::Cusum));
        let mut det = GlobalDetector::new(&config, 0.5).unwrap();
        assert_eq!(
            det.step(&[0.0, 1.0]),
            Err(FusionError::Width {
                expected: 3,
                got: 2
            })
        );
        assert!(matches!(
            det.step(&[0.0, f64::NAN, 0.0]),
            Err(FusionError::NonFinite { stream: 1, .. })
        ));
        let s = det.step_increments(&[0.0, 1.0, 0.0]).unwrap();
        assert!(s.alarm);
        assert_eq!(det.alarm(), Some(1));
        assert_eq!(det.step(&[0.0; 3]), Err(FusionError::AlreadyAlarmed(1)));
        det.reset();
        assert_eq!(det.samples(), 0);
        assert!(det.step(&[0.0; 3]).is_ok());
    }

    #[test]
    fn threshold_fraction_resolves_against_h() {
        let kind = FusionKind::CensoredFixed(CensorLevel::ThresholdFraction(0.6));
        let config = DetectorConfig::homogeneous(model(), 3, rule(kind, LocalStatistic::Cusum));
        let mut det = GlobalDetector::new(&config, 10.0).unwrap();
        det.step_increments(&V).unwrap();
        assert_eq!(det.fused().value, 8.0);
        assert!(config.rule.depends_on_threshold());
    }

    #[test]
    fn memory_footprint_per_stream() {
        let fma = DetectorConfig::homogeneous(
            model(),
            10,
            rule(FusionKind::Sum, LocalStatistic::Fma { window: 200 }),
        );
        let det = GlobalDetector::new(&fma, 1.0).unwrap();
        assert_eq!(det.streams()[0].fma().unwrap().capacity(), 200);
        assert_eq!(
            det.stored_reals(),
            10 * (200 + 1 + TeCusumState::STORED_REALS)
        );
        let te = DetectorConfig::homogeneous(
            model(),
            10,
            rule(FusionKind::Sum, LocalStatistic::TeCusum),
        );
        assert_eq!(
            GlobalDetector::new(&te, 1.0).unwrap().stored_reals(),
            10 * TeCusumState::STORED_REALS
        );
    }

    #[test]
    fn streaming_matches_batch_recomputation() {
        let (l, n) = (5, 400);
        let mut rng = seed::rng(5);
        let data: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..l)
                    .map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal) + 0.05)
                    .collect()
            })
            .collect();
        let config = DetectorConfig::homogeneous(
            model(),
            l,
            rule(
                FusionKind::CensoredAdaptive { alpha: 0.6 },
                LocalStatistic::TeCusum,
            ),
        );
        let mut det = GlobalDetector::tracer(&config).unwrap();
        for t in 0..n {
            let got = det.step_increments(&data[t]).unwrap().value;
            // Non-incremental: G_l = max over windows (nu, N] with N <= t+1.
            let g: Vec<f64> = (0..l)
                .map(|s| {
                    let mut best = 0.0f64;
                    for a in 0..=t {
                        let mut acc = 0.0;
                        for row in &data[a..=t] {
                            acc += row[s];
                            best = best.max(acc);
                        }
                    }
                    best
                })
                .collect();
            let expected = fuse_censored_adaptive(&g, 0.6).unwrap().value;
            assert!((got - expected).abs() < 1e-9, "t={t}: {got} vs {expected}");
        }
    }

    #[test]
    fn sum_tecusum_holds_through_gaps_while_sum_cusum_decays() {
        // Three streams exposed one after another with idle gaps in between.
        let m = model();
        let mk = |statistic| DetectorConfig::homogeneous(m, 3, rule(FusionKind::Sum, statistic));
        let mut te = GlobalDetector::tracer(&mk(LocalStatistic::TeCusum)).unwrap();
        let mut sc = GlobalDetector::tracer(&mk(LocalStatistic::Cusum)).unwrap();
        let mut te_path = Vec::new();
        let mut sc_path = Vec::new();
        for n in 0..600 {
            let mut x = [0.0; 3];
            for (s, xs) in x.iter_mut().enumerate() {
                let start = 100 + 150 * s;
                if (start..start + 100).contains(&n) {
                    *xs = 0.4;
                }
            }
            te_path.push(te.step(&x).unwrap().value);
            sc_path.push(sc.step(&x).unwrap().value);
        }
        assert!(te_path.windows(2).all(|w| w[1] >= w[0]));
        // Gap after the first exposure: samples 200..250.
        assert!(sc_path[249] < sc_path[199]);
        assert_eq!(te_path[249], te_path[199]);
    }

    proptest! {
        #[test]
        fn fused_value_lies_between_min_and_max(
            v in prop::collection::vec(-20.0f64..20.0, 1..12),
            alpha in 0.0f64..=1.0,
            c in -20.0f64..20.0,
        ) {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = max_of(&v);
            for f in [
                fuse_sum(&v).unwrap(),
                fuse_max(&v).unwrap(),
                fuse_censored_fixed(&v, c).unwrap(),
                fuse_censored_adaptive(&v, alpha).unwrap(),
            ] {
                prop_assert!(f.value >= lo - 1e-12 && f.value <= hi + 1e-12);
                prop_assert!(!f.active_set.is_empty());
            }
        }

        #[test]
        fn reductions_are_exact(v in prop::collection::vec(-50.0f64..50.0, 1..12)) {
            prop_assert_eq!(fuse_censored_adaptive(&v, 0.0).unwrap().value, fuse_sum(&v).unwrap().value);
            prop_assert_eq!(fuse_censored_adaptive(&v, 1.0).unwrap().value, fuse_max(&v).unwrap().value);
            prop_assert_eq!(fuse_censored_fixed(&v, f64::NEG_INFINITY).unwrap().value, fuse_sum(&v).unwrap().value);
        }

        #[test]
        fn active_set_shrinks_as_alpha_grows(v in prop::collection::vec(0.01f64..50.0, 1..12), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small = fuse_censored_adaptive(&v, lo).unwrap().active_set;
            let large = fuse_censored_adaptive(&v, hi).unwrap().active_set;
            prop_assert!(large.iter().all(|i| small.contains(i)));
        }

        #[test]
        fn alarm_index_is_scale_invariant(
            inc in prop::collection::vec(prop::collection::vec(-1.0f64..1.2, 4), 1..200),
            h in 0.5f64..6.0,
            scale_exp in -3i32..4,
        ) {
            // Power-of-two scaling is exact in floating point.
            let k = 2f64.powi(scale_exp);
            for kind in [FusionKind::Sum, FusionKind::Max, FusionKind::CensoredAdaptive { alpha: 0.6 },
                         FusionKind::CensoredFixed(CensorLevel::ThresholdFraction(0.5))] {
                for statistic in [LocalStatistic::Cusum, LocalStatistic::TeCusum, LocalStatistic::Fma { window: 7 }] {
                    let config = DetectorConfig::homogeneous(model(), 4, rule(kind, statistic));
                    let mut a = GlobalDetector::new(&config, h).unwrap();
                    let mut b = GlobalDetector::new(&config, h * k).unwrap();
                    let mut first = (None, None);
                    for row in &inc {
                        let scaled: Vec<f64> = row.iter().map(|v| v * k).collect();
                        if first.0.is_none() && a.step_increments(row).unwrap().alarm { first.0 = Some(a.samples()); }
                        if first.1.is_none() && b.step_increments(&scaled).unwrap().alarm { first.1 = Some(b.samples()); }
                        if first.0.is_some() && first.1.is_some() { break; }
                    }
                    prop_assert_eq!(first.0, first.1);
                }
            }
        }
    }
}

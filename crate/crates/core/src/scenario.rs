// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic multi-sensor streams: i.i.d. `N(0, sigma^2)` noise plus a mean
//! offset `A` on each affected sensor during its exposure window.
//!
//! Samples are numbered from 1. The sensor of exposure rank `r` (its position
//! in [`ScenarioSpec::affected`]) is exposed on samples `(nu_r, N_r]` with
//! `nu_r = onset + r * stagger - 1` and `N_r = nu_r + exposure_len`.

use crate::seed::{self, SimRng};
use rand::Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use thiserror::Error;

/// Samples simulated after the end of exposure in the preset scenarios.
pub const PRESET_TAIL: u64 = 500;
/// First exposed sample in the preset scenarios.
pub const PRESET_ONSET: u64 = 1500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario {name}: {reason}")]
    Invalid { name: String, reason: String },
    #[error("scenario {name}: exposure of sensor {sensor} ends at sample {end}, past the horizon {horizon}")]
    WindowOverflow {
        name: String,
        sensor: usize,
        end: u64,
        horizon: u64,
    },
    #[error("unknown scenario preset {0:?} (expected scenario-1 or scenario-2)")]
    UnknownPreset(String),
}

/// Exposure of one sensor: samples `start_after + 1 ..= end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExposureWindow {
    pub sensor: usize,
    pub start_after: u64,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub num_sensors: usize,
    /// Affected sensors in exposure order.
    pub affected: Vec<usize>,
    pub amplitude: f64,
    pub sigma: f64,
    pub exposure_len: u64,
    /// First exposed sample of the first affected sensor.
    pub onset: u64,
    /// Delay between the onsets of consecutive affected sensors.
    pub stagger: u64,
    pub horizon: u64,
}

impl ScenarioSpec {
    /// Affects sensors `0..k` and sets the horizon to the end of exposure plus `tail`.
    #[allow(clippy::too_many_arguments)]
    pub fn staggered(
        name: impl Into<String>,
        num_sensors: usize,
        k: usize,
        amplitude: f64,
        sigma: f64,
        exposure_len: u64,
        onset: u64,
        stagger: u64,
        tail: u64,
    ) -> Self {
        let mut spec = Self {
            name: name.into(),
            num_sensors,
            affected: (0..k).collect(),
            amplitude,
            sigma,
            exposure_len,
            onset,
            stagger,
            horizon: 0,
        };
        spec.horizon = spec.exposure_end() + tail;
        spec
    }

    fn invalid(&self, reason: impl Into<String>) -> ScenarioError {
        ScenarioError::Invalid {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.num_sensors == 0 {
            return Err(self.invalid("num_sensors must be at least 1"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(self.invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.amplitude.is_finite() {
            return Err(self.invalid("amplitude must be finite"));
        }
        if self.onset == 0 {
            return Err(self.invalid("onset is a 1-based sample index"));
        }
        if self.horizon == 0 {
            return Err(self.invalid("horizon must be at least 1"));
        }
        let mut seen = BTreeSet::new();
        for &s in &self.affected {
            if s >= self.num_sensors {
                return Err(self.invalid(format!(
                    "affected sensor {s} outside 0..{}",
                    self.num_sensors
                )));
            }
            if !seen.insert(s) {
                return Err(self.invalid(format!("sensor {s} listed twice")));
            }
        }
        if !self.affected.is_empty() && self.exposure_len == 0 {
            return Err(self.invalid("exposure_len must be at least 1"));
        }
        for w in self.windows() {
            if w.end > self.horizon {
                return Err(ScenarioError::WindowOverflow {
                    name: self.name.clone(),
                    sensor: w.sensor,
                    end: w.end,
                    horizon: self.horizon,
                });
            }
        }
        Ok(())
    }

    pub fn windows(&self) -> Vec<ExposureWindow> {
        self.affected
            .iter()
            .enumerate()
            .map(|(rank, &sensor)| {
                let start_after = self.onset - 1 + rank as u64 * self.stagger;
                ExposureWindow {
                    sensor,
                    start_after,
                    end: start_after + self.exposure_len,
                }
            })
            .collect()
    }

    /// First exposed sample.
    pub fn exposure_start(&self) -> u64 {
        self.onset
    }

    /// Last sample at which any sensor is exposed.
    pub fn exposure_end(&self) -> u64 {
        self.windows()
            .iter()
            .map(|w| w.end)
            .max()
            .unwrap_or(self.onset)
    }

    /// Total exposed sensor-samples; independent of the stagger.
    pub fn exposed_sensor_samples(&self) -> u64 {
        self.affected.len() as u64 * self.exposure_len
    }

    /// Row-by-row generator; deterministic in `seed`.
    pub fn stream(&self, seed: u64) -> Result<ScenarioStream, ScenarioError> {
        self.validate()?;
        let mut means = vec![(0u64, 0u64); self.num_sensors];
        for w in self.windows() {
            means[w.sensor] = (w.start_after, w.end);
        }
        Ok(ScenarioStream {
            windows: means,
            amplitude: self.amplitude,
            sigma: self.sigma,
            horizon: self.horizon,
            n: 0,
            rng: seed::rng(seed),
        })
    }

    /// Full observation matrix; identical to collecting [`ScenarioSpec::stream`].
    pub fn generate(&self, seed: u64) -> Result<ObservationMatrix, ScenarioError> {
        let mut stream = self.stream(seed)?;
        let mut data = vec![0.0; self.num_sensors * self.horizon as usize];
        for row in data.chunks_exact_mut(self.num_sensors) {
            stream.fill_row(row);
        }
        Ok(ObservationMatrix {
            num_sensors: self.num_sensors,
            horizon: self.horizon,
            data,
            windows: self.windows(),
        })
    }
}

/// Streaming source of scenario rows.
#[derive(Debug, Clone)]
pub struct ScenarioStream {
    windows: Vec<(u64, u64)>,
    amplitude: f64,
    sigma: f64,
    horizon: u64,
    n: u64,
    rng: SimRng,
}

impl ScenarioStream {
    /// Index of the next sample (1-based).
    pub fn next_sample(&self) -> u64 {
        self.n + 1
    }

    /// Writes the next row into `row`; `false` once the horizon is exhausted.
    #[inline]
    pub fn fill_row(&mut self, row: &mut [f64]) -> bool {
        if self.n >= self.horizon {
            return false;
        }
        self.n += 1;
        let n = self.n;
        for (x, &(after, end)) in row.iter_mut().zip(&self.windows) {
            let z: f64 = self.rng.sample(StandardNormal);
            let mean = if n > after && n <= end {
                self.amplitude
            } else {
                0.0
            };
            *x = mean + self.sigma * z;
        }
        true
    }
}

/// `horizon x L` samples in row-major order with their ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub num_sensors: usize,
    pub horizon: u64,
    pub data: Vec<f64>,
    pub windows: Vec<ExposureWindow>,
}

impl ObservationMatrix {
    /// Row of 1-based sample `n`.
    pub fn row(&self, n: u64) -> &[f64] {
        let i = (n - 1) as usize * self.num_sensors;
        &self.data[i..i + self.num_sensors]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.num_sensors)
    }

    /// Whether sensor `sensor` carries the offset at sample `n`.
    pub fn is_exposed(&self, sensor: usize, n: u64) -> bool {
        self.windows
            .iter()
            .any(|w| w.sensor == sensor && n > w.start_after && n <= w.end)
    }

    /// CSV with a `sensor_<i>` header and one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (0..self.num_sensors)
            .map(|i| format!("sensor_{i}"))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// The two validation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioPreset {
    /// A = 0.4 (about -8 dB), 100-sample exposures, staggers 0/50/100/150.
    Scenario1,
    /// A = 0.2 (about -14 dB), 200-sample exposures, staggers 0/100/200/300.
    Scenario2,
}

impl ScenarioPreset {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Scenario1 => "scenario-1",
            Self::Scenario2 => "scenario-2",
        }
    }

    fn parameters(&self) -> (u32, f64, u64) {
        match self {
            Self::Scenario1 => (1, 0.4, 100),
            Self::Scenario2 => (2, 0.2, 200),
        }
    }
}

impl fmt::Display for ScenarioPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioPreset {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scenario-1" => Ok(Self::Scenario1),
            "scenario-2" => Ok(Self::Scenario2),
            other => Err(ScenarioError::UnknownPreset(other.to_string())),
        }
    }
}

/// Stagger rows of the experiment grid, as (label, multiple of half an exposure).
pub const STAGGERS: [(&str, u64); 4] = [("sync", 0), ("half", 1), ("full", 2), ("gap", 3)];
/// Affected-subset columns of the experiment grid.
pub const SUBSETS: [usize; 3] = [3, 5, 7];

/// The 12 specs (4 staggers x 3 subsets) of a preset, on 10 sensors.
pub fn scenario_matrix(preset: ScenarioPreset) -> Vec<ScenarioSpec> {
    let (idx, amplitude, exposure) = preset.parameters();
    STAGGERS
        .iter()
        .flat_map(|&(label, halves)| {
            SUBSETS.iter().map(move |&k| {
                ScenarioSpec::staggered(
                    format!("s{idx}-{label}-k{k}"),
                    10,
                    k,
                    amplitude,
                    1.0,
                    exposure,
                    PRESET_ONSET,
                    halves * exposure / 2,
                    PRESET_TAIL,
                )
            })
        })
        .collect()
}

/// Resolves a preset name.
pub fn preset_specs(name: &str) -> Result<Vec<ScenarioSpec>, ScenarioError> {
    Ok(scenario_matrix(name.parse()?))
}

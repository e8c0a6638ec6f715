// SPDX-License-Identifier: MIT OR Apache-2.0

//! Observation models and log-likelihood ratio increments.
//!
//! Only the Gaussian mean-shift pair is implemented. The detector code only
//! ever sees the increment `log f1(x) / f0(x)`, so other density pairs can be
//! added behind [`LlrModel`].

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("sigma must be finite and positive, got {0}")]
    InvalidSigma(f64),
    #[error("mean shift mu1 - mu0 must be finite and nonzero, got {0}")]
    DegenerateShift(f64),
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("amplitude must be nonzero to express an SNR in dB")]
    ZeroAmplitude,
}

/// Log of the likelihood ratio of one sample.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LlrIncrement(f64);

impl LlrIncrement {
    pub fn new(value: f64) -> Result<Self, ModelError> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(ModelError::NonFinite {
                what: "increment",
                value,
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// A pre/post-change density pair.
pub trait LlrModel {
    /// `log f1(x) - log f0(x)`.
    fn llr(&self, x: f64) -> Result<LlrIncrement, ModelError>;
}

/// `N(mu0, sigma^2)` before the change, `N(mu1, sigma^2)` after.
///
/// `mu1` is the amplitude the detector *expects*; the amplitude of simulated
/// data is configured separately on the scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMeanShiftModel {
    mu0: f64,
    mu1: f64,
    sigma: f64,
    scale: f64,
    midpoint: f64,
}

impl GaussianMeanShiftModel {
    pub fn new(mu0: f64, mu1: f64, sigma: f64) -> Result<Self, ModelError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ModelError::InvalidSigma(sigma));
        }
        for (what, value) in [("mu0", mu0), ("mu1", mu1)] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { what, value });
            }
        }
        let delta = mu1 - mu0;
        if delta == 0.0 || !delta.is_finite() {
            return Err(ModelError::DegenerateShift(delta));
        }
        Ok(Self {
            mu0,
            mu1,
            sigma,
            scale: delta / (sigma * sigma),
            midpoint: mu0 + delta / 2.0,
        })
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `mu1 - mu0`.
    pub fn delta(&self) -> f64 {
        self.mu1 - self.mu0
    }

    /// `(delta / sigma^2) * (x - mu0 - delta / 2)` without the finiteness check.
    #[inline]
    pub fn llr_value(&self, x: f64) -> f64 {
        self.scale * (x - self.midpoint)
    }

    /// Mean increment when `x ~ N(mu1, sigma^2)`; the negation applies under `N(mu0, sigma^2)`.
    pub fn post_change_drift(&self) -> f64 {
        let d = self.delta();
        d * d / (2.0 * self.sigma * self.sigma)
    }

    /// SNR in dB of a true amplitude against this model's noise level.
    pub fn snr_db(&self, amplitude: f64) -> Result<f64, ModelError> {
        snr_db(amplitude, self.sigma)
    }
}

impl LlrModel for GaussianMeanShiftModel {
    fn llr(&self, x: f64) -> Result<LlrIncrement, ModelError> {
        if !x.is_finite() {
            return Err(ModelError::NonFinite {
                what: "observation",
                value: x,
            });
        }
        Ok(LlrIncrement(self.llr_value(x)))
    }
}

/// `10 log10(A^2 / sigma^2)`.
pub fn snr_db(amplitude: f64, sigma: f64) -> Result<f64, ModelError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(ModelError::InvalidSigma(sigma));
    }
    if !amplitude.is_finite() {
        return Err(ModelError::NonFinite {
            what: "amplitude",
            value: amplitude,
        });
    }
    if amplitude == 0.0 {
        return Err(ModelError::ZeroAmplitude);
    }
    Ok(10.0 * (amplitude * amplitude / (sigma * sigma)).log10())
}

/// Inverse of [`snr_db`] for a positive amplitude.
pub fn amplitude_for_snr_db(db: f64, sigma: f64) -> f64 {
    sigma * 10f64.powf(db / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    // Independent of the closed form: log of the normalised density.
    fn log_density(x: f64, mu: f64, sigma: f64) -> f64 {
        let z = (x - mu) / sigma;
        ((-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())).ln()
    }

    fn model(mu0: f64, mu1: f64, sigma: f64) -> GaussianMeanShiftModel {
        GaussianMeanShiftModel::new(mu0, mu1, sigma).unwrap()
    }

    #[test]
    fn midpoint_gives_zero_increment() {
        assert_eq!(model(0.0, 0.4, 1.0).llr(0.2).unwrap().value(), 0.0);
    }

    #[test]
    fn post_change_mean_increment() {
        let v = model(0.0, 0.4, 1.0).llr(0.4).unwrap().value();
        assert!((v - 0.08).abs() < 1e-15, "{v}");
    }

    #[test]
    fn matches_log_density_difference_at_fig1_parameters() {
        let m = model(0.0, 0.1, 1.0);
        let expected = log_density(-0.3, 0.1, 1.0) - log_density(-0.3, 0.0, 1.0);
        let got = m.llr(-0.3).unwrap().value();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got + 0.035).abs() < 1e-12);
    }

    #[test]
    fn matches_log_density_difference_on_grid() {
        for (mu0, mu1, sigma) in [(0.0, 0.4, 1.0), (1.5, -0.7, 2.3), (-3.0, -2.9, 0.5)] {
            let m = model(mu0, mu1, sigma);
            for i in 0..1000 {
                let x = mu0 - 5.0 * sigma + 10.0 * sigma * (i as f64) / 999.0;
                let closed = m.llr(x).unwrap().value();
                let explicit = log_density(x, mu1, sigma) - log_density(x, mu0, sigma);
                assert!(
                    (closed - explicit).abs() <= 1e-12 * closed.abs().max(1.0),
                    "x={x}: {closed} vs {explicit}"
                );
            }
        }
    }

    #[test]
    fn antisymmetric_about_midpoint() {
        let m = model(0.3, -0.5, 1.7);
        let mid = 0.3 + (-0.8) / 2.0;
        for i in 0..200 {
            let u = i as f64 * 0.037;
            let a = m.llr_value(mid + u);
            let b = m.llr_value(mid - u);
            assert!((a + b).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn empirical_drift_under_both_hypotheses() {
        let m = model(0.0, 0.4, 1.0);
        let drift = m.post_change_drift();
        assert!((drift - 0.08).abs() < 1e-15);
        let mut rng = seed::rng(seed::derive(11, &[1]));
        let n = 1_000_000;
        for (mean, expected) in [(0.4, drift), (0.0, -drift)] {
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let v = m.llr_value(mean + z);
                s += v;
                s2 += v * v;
            }
            let avg = s / n as f64;
            let se = ((s2 / n as f64 - avg * avg) / n as f64).sqrt();
            assert!(
                (avg - expected).abs() < 3.0 * se,
                "mean {avg}, expected {expected}, se {se}"
            );
        }
    }

    #[test]
    fn rejects_degenerate_models_and_inputs() {
        assert_eq!(
            GaussianMeanShiftModel::new(0.0, 0.0, 1.0),
            Err(ModelError::DegenerateShift(0.0))
        );
        assert!(matches!(
            GaussianMeanShiftModel::new(0.0, 1.0, 0.0),
            Err(ModelError::InvalidSigma(_))
        ));
        assert!(GaussianMeanShiftModel::new(0.0, 1.0, f64::NAN).is_err());
        assert!(GaussianMeanShiftModel::new(f64::INFINITY, 1.0, 1.0).is_err());
        assert!(model(0.0, 1.0, 1.0).llr(f64::NAN).is_err());
        assert!(LlrIncrement::new(f64::INFINITY).is_err());
    }

    #[test]
    fn snr_of_the_validation_scenarios() {
        let m = model(0.0, 0.4, 1.0);
        assert!((m.snr_db(0.4).unwrap() + 7.9588).abs() < 1e-4);
        assert!((m.snr_db(0.2).unwrap() + 13.9794).abs() < 1e-4);
        assert_eq!(snr_db(2.5, 2.5).unwrap(), 0.0);
        assert_eq!(snr_db(0.0, 1.0), Err(ModelError::ZeroAmplitude));
        let a = amplitude_for_snr_db(-6.0, 1.0);
        assert!((snr_db(a, 1.0).unwrap() + 6.0).abs() < 1e-12);
    }
}

//! Posturographic features of a resampled CoP trajectory.
//!
//! Positional features are measured relative to the trajectory centroid, so
//! `MaxX >= 0 >= MinX` and every feature is invariant to where the subject
//! stood on the platform.

use std::fmt;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Statokinesigram;

/// Number of features in a [`FeatureVector`].
pub const FEATURE_COUNT: usize = 17;

/// Feature names, in matrix column order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "RangeX",
    "MaxX",
    "MinX",
    "VarianceX",
    "VelocityX",
    "AccelerationX",
    "F95X",
    "RangeY",
    "MaxY",
    "MinY",
    "VarianceY",
    "VelocityY",
    "AccelerationY",
    "F95Y",
    "DistC",
    "EllArea",
    "AngularDeviation",
];

/// 0.95 quantile of the chi-square distribution with two degrees of freedom.
pub const CHI2_2DOF_95: f64 = 5.991;

/// Minimum trajectory length accepted by [`extract_features`].
pub const MIN_SAMPLES: usize = 16;

/// The posturographic features of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub subject_id: String,
    pub values: [f64; FEATURE_COUNT],
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        FEATURE_NAMES.iter().copied().zip(self.values.iter().copied())
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.subject_id)?;
        for (name, v) in self.iter() {
            write!(f, " {name}={v:.4}")?;
        }
        Ok(())
    }
}

struct AxisFeatures {
    max: f64,
    min: f64,
    variance: f64,
    velocity: f64,
    acceleration: f64,
    f95: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn axis_features(centered: &[f64], rate_hz: f64) -> AxisFeatures {
    let n = centered.len();
    let max = centered.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = centered.iter().copied().fold(f64::INFINITY, f64::min);
    let variance = centered.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
    let velocity =
        centered.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 1) as f64 * rate_hz;
    let acceleration = centered
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs())
        .sum::<f64>()
        / (n - 2) as f64
        * rate_hz
        * rate_hz;
    AxisFeatures {
        max,
        min,
        variance,
        velocity,
        acceleration,
        f95: f95_unchecked(centered, rate_hz),
    }
}

/// Computes the 17 features of a statokinesigram.
///
/// Degenerate trajectories (all points identical) are valid input and give
/// zero variances, frequencies and area.
pub fn extract_features(s: &Statokinesigram) -> Result<FeatureVector> {
    let n = s.len();
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "feature extraction needs at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    let rate = s.rate_hz();
    let (cx, cy) = (mean(s.x()), mean(s.y()));
    let xc: Vec<f64> = s.x().iter().map(|v| v - cx).collect();
    let yc: Vec<f64> = s.y().iter().map(|v| v - cy).collect();

    let fx = axis_features(&xc, rate);
    let fy = axis_features(&yc, rate);

    let dist_c = xc.iter().zip(&yc).map(|(x, y)| x.hypot(*y)).sum::<f64>() / n as f64;

    let cov_xy = xc.iter().zip(&yc).map(|(x, y)| x * y).sum::<f64>() / (n - 1) as f64;
    let det = (fx.variance * fy.variance - cov_xy * cov_xy).max(0.0);
    let ell_area = std::f64::consts::PI * CHI2_2DOF_95 * det.sqrt();

    // Angle between the centroid-to-point vector and the +y axis; points on the centroid have no direction.
    let (angle_sum, angle_count) = xc
        .iter()
        .zip(&yc)
        .filter(|(x, y)| **x != 0.0 || **y != 0.0)
        .fold((0.0, 0usize), |(sum, count), (x, y)| {
            (sum + x.abs().atan2(*y).to_degrees(), count + 1)
        });
    let angular_deviation = if angle_count == 0 {
        0.0
    } else {
        angle_sum / angle_count as f64
    };

    let values = [
        fx.max - fx.min,
        fx.max,
        fx.min,
        fx.variance,
        fx.velocity,
        fx.acceleration,
        fx.f95,
        fy.max - fy.min,
        fy.max,
        fy.min,
        fy.variance,
        fy.velocity,
        fy.acceleration,
        fy.f95,
        dist_c,
        ell_area,
        angular_deviation,
    ];
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "{}: feature {} is not finite",
            s.subject_id(),
            FEATURE_NAMES[i]
        )));
    }
    Ok(FeatureVector {
        subject_id: s.subject_id().to_string(),
        values,
    })
}

/// One-sided periodogram of a real series: `(frequencies, power)` for bins
/// `1..=n/2` (DC excluded), rectangular window, no padding.
pub fn periodogram(series: &[f64], rate_hz: f64) -> (Vec<f64>, Vec<f64>) {
    let n = series.len();
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let scale = 1.0 / (rate_hz * n as f64);
    let freqs = (1..=half).map(|j| j as f64 * rate_hz / n as f64).collect();
    let power = (1..=half)
        .map(|j| {
            let p = buf[j].norm_sqr() * scale;
            // Bins other than Nyquist collect the mirrored negative frequency too.
            if n.is_multiple_of(2) && j == half {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    (freqs, power)
}

/// Frequency below which 95% of the series' spectral energy lies.
///
/// The series is de-meaned first. Returns 0 when the series carries no
/// energy (constant input).
pub fn f95(series: &[f64], rate_hz: f64) -> Result<f64> {
    if series.len() < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "F95 needs at least {MIN_SAMPLES} samples, got {}",
            series.len()
        )));
    }
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("rate must be positive, got {rate_hz}")));
    }
    let m = mean(series);
    let centered: Vec<f64> = series.iter().map(|v| v - m).collect();
    Ok(f95_unchecked(&centered, rate_hz))
}

fn f95_unchecked(centered: &[f64], rate_hz: f64) -> f64 {
    let (lo, hi) = centered
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi == lo {
        return 0.0;
    }
    let (freqs, power) = periodogram(centered, rate_hz);
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let target = 0.95 * total;
    let mut cumulative = 0.0;
    for (f, p) in freqs.iter().zip(&power) {
        cumulative += p;
        if cumulative >= target {
            return *f;
        }
    }
    *freqs.last().unwrap_or(&0.0)
}

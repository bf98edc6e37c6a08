use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonempty, finite per-epoch series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series(Vec<f64>);

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::SeriesTooShort { len: 0, min: 1 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("series value at index {i}"),
            });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Series {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerMethod {
    FixedThreshold,
    MaxCurvature,
}

/// How an L-curve corner is located.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerConfig {
    pub method: CornerMethod,
    /// Threshold for [`CornerMethod::FixedThreshold`].
    #[serde(default = "CornerConfig::default_theta")]
    pub theta: f64,
    /// Discretization step of the epoch axis for the curvature.
    #[serde(default = "CornerConfig::default_delta")]
    pub delta: f64,
    /// Gaussian smoothing width in epochs, applied before the curvature.
    #[serde(default = "CornerConfig::default_sigma")]
    pub smoothing_sigma: f64,
}

impl CornerConfig {
    pub const DEFAULT_THETA: f64 = 0.2;
    pub const DEFAULT_SIGMA: f64 = 5.0;

    fn default_theta() -> f64 {
        Self::DEFAULT_THETA
    }

    fn default_delta() -> f64 {
        1.0
    }

    fn default_sigma() -> f64 {
        Self::DEFAULT_SIGMA
    }

    pub fn threshold(theta: f64) -> Self {
        Self {
            method: CornerMethod::FixedThreshold,
            theta,
            delta: 1.0,
            smoothing_sigma: Self::DEFAULT_SIGMA,
        }
    }

    pub fn curvature(delta: f64, smoothing_sigma: f64) -> Self {
        Self {
            method: CornerMethod::MaxCurvature,
            theta: Self::DEFAULT_THETA,
            delta,
            smoothing_sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.smoothing_sigma >= 0.0 && self.smoothing_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "smoothing_sigma must be >= 0, got {}",
                self.smoothing_sigma
            )));
        }
        Ok(())
    }
}

impl Default for CornerConfig {
    fn default() -> Self {
        Self::threshold(Self::DEFAULT_THETA)
    }
}

/// Discrete Gaussian smoothing with the kernel truncated at `±⌈3σ⌉` and
/// renormalized over the part that overlaps the series.
pub fn gaussian_smooth(s: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 || s.len() < 2 {
        return s.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let kernel: Vec<f64> = (0..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let n = s.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (j, &v) in s.iter().enumerate().take(hi + 1).skip(lo) {
                let w = kernel[i.abs_diff(j)];
                acc += w * v;
                wsum += w;
            }
            acc / wsum
        })
        .collect()
}

/// `κ_i = Δ·(c_i − c_{i−2}) / (Δ² + (c_i − c_{i−1})²)^{3/2}` for `i ≥ 2`.
///
/// Element `k` of the result belongs to series index `k + 2`.
pub fn curvature_series(s: &[f64], delta: f64) -> Result<Vec<f64>> {
    if s.len() < 3 {
        return Err(Error::SeriesTooShort { len: s.len(), min: 3 });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
    }
    let d2 = delta * delta;
    Ok((2..s.len())
        .map(|i| {
            let step = s[i] - s[i - 1];
            delta * (s[i] - s[i - 2]) / (d2 + step * step).powf(1.5)
        })
        .collect())
}

/// Locates the L-curve corner of a cosine-distance series.
///
/// Returns the series index, or `None` when the threshold is never crossed
/// or the series is too short for a curvature.
pub fn detect_corner(s: &[f64], cfg: &CornerConfig) -> Option<usize> {
    detect_corner_masked(s, cfg, |_| true)
}

/// [`detect_corner`] restricted to indices accepted by `eligible`.
pub fn detect_corner_masked(
    s: &[f64],
    cfg: &CornerConfig,
    eligible: impl Fn(usize) -> bool,
) -> Option<usize> {
    match cfg.method {
        CornerMethod::FixedThreshold => (0..s.len()).find(|&i| s[i] < cfg.theta && eligible(i)),
        CornerMethod::MaxCurvature => {
            if s.len() < 3 {
                return None;
            }
            let smoothed = gaussian_smooth(s, cfg.smoothing_sigma);
            let kappa = curvature_series(&smoothed, cfg.delta).ok()?;
            let mut best: Option<(usize, f64)> = None;
            for (k, v) in kappa.iter().enumerate() {
                let i = k + 2;
                if !eligible(i) {
                    continue;
                }
                let mag = v.abs();
                if best.is_none_or(|(_, b)| mag > b) {
                    best = Some((i, mag));
                }
            }
            best.map(|(i, _)| i)
        }
    }
}

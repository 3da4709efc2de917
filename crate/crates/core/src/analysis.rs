//! Reaction-time model, slope fits and the asymmetry index.

use crate::{Error, Result};

/// Affine map from fixation count to reaction time in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RtModel {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RtModel {
    fn default() -> Self {
        RtModel {
            alpha: 252.36,
            beta: 376.27,
        }
    }
}

impl RtModel {
    pub fn rt_ms(&self, n_fixations: usize) -> f64 {
        self.alpha * n_fixations as f64 + self.beta
    }
}

/// Ordinary least squares fit of `y = slope * x + intercept`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = points.len() as f64;
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("fit_slope: non-finite point"));
    }
    if points.len() < 2 {
        return Err(Error::invalid("fit_slope: need at least two points"));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("fit_slope: need at least two distinct x values"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `(hard - easy) / (hard + easy)`, undefined when both slopes cancel.
pub fn asymmetry_index(hard: f64, easy: f64) -> Option<f64> {
    let s = hard + easy;
    if s == 0.0 || !s.is_finite() {
        None
    } else {
        Some((hard - easy) / s)
    }
}

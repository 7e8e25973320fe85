//! Log-log least squares for rate claims.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norms at or below this are round-off and excluded from fits.
pub const NOISE_FLOOR: f64 = 1e-11;
pub const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("only {usable} points above the noise floor, need {MIN_FIT_POINTS}")]
    InsufficientPoints { usable: usize },
    #[error("epsilon and norm lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits log(norm) = slope·log(ε) + intercept over the points above [`NOISE_FLOOR`].
pub fn fit_rate(eps: &[f64], norms: &[f64]) -> Result<RateFit, FitError> {
    if eps.len() != norms.len() {
        return Err(FitError::LengthMismatch(eps.len(), norms.len()));
    }
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(norms)
        .filter(|(e, n)| **e > 0.0 && n.is_finite() && **n > NOISE_FLOOR)
        .map(|(e, n)| (e.ln(), n.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(FitError::InsufficientPoints { usable: pts.len() });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}

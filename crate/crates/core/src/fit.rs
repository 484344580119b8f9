//! Least-squares line fits for scaling laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for exactly collinear points.
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares `y ≈ slope·x + intercept`, at least three points.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!("{} abscissae but {} ordinates", x.len(), y.len())));
    }
    let k = x.len();
    if k < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {k}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data".into()));
    }
    let kf = k as f64;
    let mx = x.iter().sum::<f64>() / kf;
    let my = y.iter().sum::<f64>() / kf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let slope_stderr = (sse / (kf - 2.0) / sxx).sqrt();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(FitResult {
        slope,
        intercept,
        slope_stderr,
        r_squared,
        points: k,
    })
}

/// Exponent `α` in `y ≈ C·x^α` by a log–log fit. All values must be positive.
pub fn fit_exponent(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.iter().chain(y).any(|&v| v <= 0.0) {
        return Err(Error::Fit("log–log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Rate `β` in `y ≈ C·e^{βx}` by a semi-log fit. All `y` must be positive.
pub fn fit_log_linear(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if y.iter().any(|&v| v <= 0.0) {
        return Err(Error::Fit("semi-log fit needs positive values".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(x, &ly)
}

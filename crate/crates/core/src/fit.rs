//! Ordinary least squares on log-log data, used for convergence-rate fits.

use serde::Serialize;
use thiserror::Error;

use crate::kahan::KahanSum;

/// Result of a least-squares line fit on `(log n, log y)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateFit {
    /// Fitted power-law exponent.
    pub slope: f64,
    /// Fitted `log`-scale intercept.
    pub intercept: f64,
    /// Euclidean norm of the log-scale residuals; at most ~1e-10 on exact
    /// power laws.
    pub residual: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("rate fit requires positive ordinates; y[{index}] = {value}")]
    NonPositive { index: usize, value: f64 },
    #[error("rate fit requires positive abscissas; x[{index}] = {value}")]
    NonPositiveAbscissa { index: usize, value: f64 },
    #[error("abscissas are all identical; slope is undefined")]
    DegenerateAbscissa,
}

/// Least-squares power-law fit `y ≈ e^intercept · x^slope`.
///
/// Rejects inputs with fewer than 3 points or non-positive coordinates.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    for (i, &(x, y)) in points.iter().enumerate() {
        if x <= 0.0 || x.is_nan() {
            return Err(FitError::NonPositiveAbscissa { index: i, value: x });
        }
        if y <= 0.0 || y.is_nan() {
            return Err(FitError::NonPositive { index: i, value: y });
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    line_through(&logs)
}

/// Plain least-squares line through already-transformed points.
///
/// Unlike [`fit_rate`] this accepts two points (the fit is then the exact
/// secant line); it is the backend for deterministic slope scans that are
/// specified down to the two-point case.
pub fn line_through(points: &[(f64, f64)]) -> Result<RateFit, FitError> {
    if points.len() < 2 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mut sx = KahanSum::new();
    let mut sy = KahanSum::new();
    for &(x, y) in points {
        sx.add(x);
        sy.add(y);
    }
    let mean_x = sx.value() / n;
    let mean_y = sy.value() / n;

    let mut sxx = KahanSum::new();
    let mut sxy = KahanSum::new();
    for &(x, y) in points {
        let dx = x - mean_x;
        sxx.add(dx * dx);
        sxy.add(dx * (y - mean_y));
    }
    if sxx.value() == 0.0 {
        return Err(FitError::DegenerateAbscissa);
    }
    let slope = sxy.value() / sxx.value();
    let intercept = mean_y - slope * mean_x;

    let mut rss = KahanSum::new();
    for &(x, y) in points {
        let r = y - (intercept + slope * x);
        rss.add(r * r);
    }
    Ok(RateFit {
        slope,
        intercept,
        residual: rss.value().sqrt(),
    })
}

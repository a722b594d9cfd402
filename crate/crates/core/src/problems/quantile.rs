//! Online quantile estimation: the scalar objective whose stochastic
//! gradient is the indicator score `1_{X ≤ θ} − (1 − α)`.
//!
//! The iteration's fixed point is the level where the data's CDF equals
//! `1 − α`; with `G` the CDF and the problem centered there, the objective
//! is `f(η) = ∫₀^η (G(q+u) − (1−α)) du`, with derivative `G(q+η) − (1−α)`
//! (bounded), second derivative the density `p(q+η)`, and gradient-noise
//! variance `G(1−G)` — all available in closed form.
//!
//! The asymptotic covariance constant is `Σ* = S*/H² = α(1−α)/p(q)²`; note
//! the density enters *squared* (a single power is a frequent misprint of
//! this constant).

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use super::Problem;

#[derive(Debug, Error, PartialEq)]
pub enum QuantileError {
    #[error("alpha must lie in (0,1), got {0}")]
    BadAlpha(f64),
    #[error("standard deviation must be positive, got {0}")]
    BadSd(f64),
    #[error("a piecewise-linear CDF needs at least two points")]
    TooFewPoints,
    #[error("abscissae must be strictly increasing (violated at row {row})")]
    NotIncreasingX { row: usize },
    #[error("CDF values must be strictly increasing (violated at row {row})")]
    NotIncreasingG { row: usize },
    #[error("CDF values must span [0,1]; got first {first}, last {last}")]
    IncompleteRange { first: f64, last: f64 },
    #[error("CSV row {row}: {reason}")]
    Csv { row: usize, reason: String },
}

/// The indicator score `1_{x ≤ θ} − (1 − α)`: one stochastic-gradient draw
/// for quantile estimation, expressed as a pure function of the draw.
///
/// Ties count as `x ≤ θ` (closed indicator) — measure-zero for continuous
/// laws, fixed here so the definition is total.
#[inline]
pub fn indicator_score(theta: f64, x: f64, alpha: f64) -> f64 {
    let indicator = if x <= theta { 1.0 } else { 0.0 };
    indicator - (1.0 - alpha)
}

/// A scalar data law exposing the pieces the quantile objective needs.
///
/// Implementations must be deterministic functions plus a sampler that
/// draws only through the supplied generator.
pub trait QuantileLaw: Send + Sync {
    /// CDF `G(x)`.
    fn cdf(&self, x: f64) -> f64;

    /// Density `p(x)` if the law has one.
    fn pdf(&self, x: f64) -> Option<f64>;

    /// Generalized inverse `G^{-1}(u)` for `u ∈ (0,1)`.
    fn quantile(&self, u: f64) -> f64;

    /// One draw of `X`.
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64;

    /// Whether [`QuantileLaw::pdf`] returns values.
    fn has_density(&self) -> bool {
        true
    }

    /// `∫_a^b G(x) dx` for `a ≤ b`. The default is adaptive Simpson
    /// quadrature to 10⁻¹² absolute; laws with closed forms override it.
    fn cdf_integral(&self, a: f64, b: f64) -> f64 {
        debug_assert!(a <= b);
        if a == b {
            return 0.0;
        }
        adaptive_simpson(&|x| self.cdf(x), a, b, 1e-12, 40)
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, depth)
}

/// Gaussian data law `N(mean, sd²)`.
#[derive(Clone, Debug)]
pub struct NormalLaw {
    mean: f64,
    sd: f64,
    dist: Normal,
}

impl NormalLaw {
    pub fn new(mean: f64, sd: f64) -> Result<Self, QuantileError> {
        if sd <= 0.0 || !sd.is_finite() || !mean.is_finite() {
            return Err(QuantileError::BadSd(sd));
        }
        Ok(Self {
            mean,
            sd,
            dist: Normal::new(mean, sd).expect("validated parameters"),
        })
    }

    pub fn standard() -> Self {
        Self::new(0.0, 1.0).expect("standard parameters")
    }
}

impl QuantileLaw for NormalLaw {
    fn cdf(&self, x: f64) -> f64 {
        self.dist.cdf(x)
    }

    fn pdf(&self, x: f64) -> Option<f64> {
        Some(self.dist.pdf(x))
    }

    fn quantile(&self, u: f64) -> f64 {
        self.dist.inverse_cdf(u)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.sd * z
    }

    /// Closed form: with `Ψ(z) = zΦ(z) + φ(z)` (an antiderivative of the
    /// standard normal CDF), `∫_a^b G = sd·[Ψ(z_b) − Ψ(z_a)]`.
    fn cdf_integral(&self, a: f64, b: f64) -> f64 {
        let std = Normal::new(0.0, 1.0).expect("standard parameters");
        let psi = |x: f64| {
            let z = (x - self.mean) / self.sd;
            z * std.cdf(z) + std.pdf(z)
        };
        self.sd * (psi(b) - psi(a))
    }
}

/// A law given by a piecewise-linear CDF through knots `(x_i, G(x_i))`,
/// e.g. loaded from a two-column CSV. `G` must be strictly increasing and
/// span `[0,1]`; the density is the (piecewise-constant) slope, taken
/// right-continuous at knots, and zero outside the support.
#[derive(Clone, Debug)]
pub struct PiecewiseLinearCdf {
    xs: Vec<f64>,
    gs: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseLinearCdf {
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self, QuantileError> {
        if points.len() < 2 {
            return Err(QuantileError::TooFewPoints);
        }
        // `partial_cmp` keeps NaN coordinates on the rejection path.
        let ascends = |a: f64, b: f64| a.partial_cmp(&b) == Some(std::cmp::Ordering::Less);
        for (row, w) in points.windows(2).enumerate() {
            if !ascends(w[0].0, w[1].0) {
                return Err(QuantileError::NotIncreasingX { row: row + 1 });
            }
            if !ascends(w[0].1, w[1].1) {
                return Err(QuantileError::NotIncreasingG { row: row + 1 });
            }
        }
        let (first, last) = (points[0].1, points[points.len() - 1].1);
        if first.abs() > 1e-9 || (last - 1.0).abs() > 1e-9 {
            return Err(QuantileError::IncompleteRange { first, last });
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let mut gs: Vec<f64> = points.iter().map(|p| p.1).collect();
        // Snap the endpoints so the law is an exact probability law.
        gs[0] = 0.0;
        let k = gs.len() - 1;
        gs[k] = 1.0;
        let slopes = xs
            .windows(2)
            .zip(gs.windows(2))
            .map(|(xw, gw)| (gw[1] - gw[0]) / (xw[1] - xw[0]))
            .collect();
        Ok(Self { xs, gs, slopes })
    }

    /// Parses `x,G(x)` rows; `#`-prefixed and blank lines are skipped.
    pub fn from_csv_str(text: &str) -> Result<Self, QuantileError> {
        let mut points = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let row = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',');
            let (x, g) = match (cols.next(), cols.next(), cols.next()) {
                (Some(x), Some(g), None) => (x.trim(), g.trim()),
                _ => {
                    return Err(QuantileError::Csv {
                        row,
                        reason: "expected exactly two comma-separated columns".into(),
                    })
                }
            };
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| QuantileError::Csv {
                    row,
                    reason: format!("bad number {s:?}: {e}"),
                })
            };
            points.push((parse(x)?, parse(g)?));
        }
        Self::from_points(&points)
    }

    fn segment_of(&self, x: f64) -> Option<usize> {
        if x < self.xs[0] || x >= self.xs[self.xs.len() - 1] {
            return None;
        }
        // Index i with xs[i] <= x < xs[i+1].
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        Some(i.min(self.slopes.len() - 1))
    }
}

impl QuantileLaw for PiecewiseLinearCdf {
    fn cdf(&self, x: f64) -> f64 {
        match self.segment_of(x) {
            Some(i) => self.gs[i] + self.slopes[i] * (x - self.xs[i]),
            None if x < self.xs[0] => 0.0,
            None => 1.0,
        }
    }

    fn pdf(&self, x: f64) -> Option<f64> {
        Some(self.segment_of(x).map_or(0.0, |i| self.slopes[i]))
    }

    fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u >= 1.0 {
            return self.xs[self.xs.len() - 1];
        }
        // Index i with gs[i] <= u < gs[i+1].
        let i = (self.gs.partition_point(|&g| g <= u).max(1) - 1).min(self.slopes.len() - 1);
        self.xs[i] + (u - self.gs[i]) / self.slopes[i]
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Exact: the CDF is linear on each segment, constant outside.
    fn cdf_integral(&self, a: f64, b: f64) -> f64 {
        debug_assert!(a <= b);
        let (x0, xk) = (self.xs[0], self.xs[self.xs.len() - 1]);
        let mut total = 0.0;
        // Region right of the support: G = 1.
        if b > xk {
            total += b - a.max(xk);
        }
        // Interior segments (G = 0 left of the support contributes nothing).
        let (lo, hi) = (a.max(x0), b.min(xk));
        if lo < hi {
            for i in 0..self.slopes.len() {
                let (sl, sr) = (self.xs[i], self.xs[i + 1]);
                let (l, r) = (lo.max(sl), hi.min(sr));
                if l < r {
                    let (dl, dr) = (l - sl, r - sl);
                    total += self.gs[i] * (r - l) + 0.5 * self.slopes[i] * (dr * dr - dl * dl);
                }
            }
        }
        total
    }
}

/// Quantile estimation via the indicator score, centered at the level
/// `q = G^{-1}(1−α)` where the mean score vanishes.
pub struct QuantileProblem {
    law: Box<dyn QuantileLaw>,
    alpha: f64,
    q_star: f64,
    key: &'static str,
}

impl QuantileProblem {
    /// Gaussian data law; registry key `quantile-normal`.
    pub fn normal(alpha: f64, mean: f64, sd: f64) -> Result<Self, QuantileError> {
        Self::with_law(Box::new(NormalLaw::new(mean, sd)?), alpha, "quantile-normal")
    }

    /// Standard-normal convenience constructor.
    pub fn standard_normal(alpha: f64) -> Result<Self, QuantileError> {
        Self::normal(alpha, 0.0, 1.0)
    }

    /// Piecewise-linear law (CSV-backed); registry key `quantile-custom`.
    pub fn custom(law: PiecewiseLinearCdf, alpha: f64) -> Result<Self, QuantileError> {
        Self::with_law(Box::new(law), alpha, "quantile-custom")
    }

    /// Any law under the `quantile-custom` key.
    pub fn with_law(
        law: Box<dyn QuantileLaw>,
        alpha: f64,
        key: &'static str,
    ) -> Result<Self, QuantileError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(QuantileError::BadAlpha(alpha));
        }
        let q_star = law.quantile(1.0 - alpha);
        Ok(Self {
            law,
            alpha,
            q_star,
            key,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The estimation target in data coordinates.
    pub fn q_star(&self) -> f64 {
        self.q_star
    }
}

impl Problem for QuantileProblem {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let eta = theta[0];
        let q = self.q_star;
        let integral = if eta >= 0.0 {
            self.law.cdf_integral(q, q + eta)
        } else {
            -self.law.cdf_integral(q + eta, q)
        };
        integral - (1.0 - self.alpha) * eta
    }

    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        out[0] = self.law.cdf(self.q_star + theta[0]) - (1.0 - self.alpha);
    }

    fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let p = self
            .law
            .pdf(self.q_star + theta[0])
            .expect("law has no density: Hessian oracle unavailable");
        DMatrix::from_element(1, 1, p)
    }

    fn hessian_available(&self) -> bool {
        self.law.has_density()
    }

    fn sample_gradient_into(&self, theta: &[f64], out: &mut [f64], rng: &mut ChaCha8Rng) {
        let x = self.law.sample(rng);
        out[0] = indicator_score(self.q_star + theta[0], x, self.alpha);
    }

    fn noise_covariance(&self, theta: &[f64]) -> DMatrix<f64> {
        let g = self.law.cdf(self.q_star + theta[0]);
        DMatrix::from_element(1, 1, g * (1.0 - g))
    }

    fn theta_star(&self) -> Vec<f64> {
        vec![self.q_star]
    }

    fn kl_exponent(&self) -> Option<f64> {
        Some(0.0)
    }

    fn name(&self) -> &'static str {
        self.key
    }
}

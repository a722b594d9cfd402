//! Problem oracles: deterministic `f`, `∇f`, `D²f`, a stochastic gradient
//! `Λ(θ, Z)` with `E[Λ(θ,·)] = ∇f(θ)`, and the gradient-noise covariance
//! `S(θ) = Cov(Λ(θ,·))`.
//!
//! # Coordinate convention
//!
//! Every implementation works in coordinates **centered at its minimizer**:
//! the argument `θ` passed to any method is the displacement from the
//! optimum, so `value(0) = 0` and `gradient(0) = 0` hold *exactly*. The
//! location of the optimum in the original parameterization is reported by
//! [`Problem::theta_star`]; callers that want estimates in original
//! coordinates add it back. Centering makes error curves bit-identical
//! under translation of a problem and spares every downstream diagnostic
//! from offset bookkeeping.

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

mod least_squares;
mod log_growth;
mod logistic;
mod quantile;

pub use least_squares::LeastSquaresProblem;
pub use log_growth::LogGrowthProblem;
pub use logistic::{logistic_score, LogisticProblem, DEFAULT_CACHE_SEED, DEFAULT_QUADRATURE_DRAWS};
pub use quantile::{
    indicator_score, NormalLaw, PiecewiseLinearCdf, QuantileLaw, QuantileProblem, QuantileError,
};

/// A stochastic optimization problem exposing exact oracles alongside the
/// noisy gradient used by the iteration.
///
/// All vector arguments are in centered coordinates (see module docs).
/// Implementations are immutable after construction; all randomness flows
/// through the caller-supplied generator, so instances may be shared freely
/// across concurrent replications, each owning its generator.
pub trait Problem: Send + Sync {
    /// Dimension `d` of the parameter space.
    fn dim(&self) -> usize;

    /// Objective value, normalized so the minimum (at the origin) is `0`.
    fn value(&self, theta: &[f64]) -> f64;

    /// Exact gradient `∇f(θ)`, written into `out` (length `d`).
    fn gradient_into(&self, theta: &[f64], out: &mut [f64]);

    /// Exact Hessian `D²f(θ)`, symmetric.
    ///
    /// # Panics
    /// If [`Problem::hessian_available`] is `false`.
    fn hessian(&self, theta: &[f64]) -> DMatrix<f64>;

    /// Whether a Hessian oracle exists (a quantile law without a density
    /// has none); `true` for every bundled benchmark.
    fn hessian_available(&self) -> bool {
        true
    }

    /// One draw of the stochastic gradient `Λ(θ, Z)`, written into `out`.
    ///
    /// Unbiased: averaging draws converges to [`Problem::gradient_into`]'s
    /// output. This is the per-step hot path and never allocates.
    fn sample_gradient_into(&self, theta: &[f64], out: &mut [f64], rng: &mut ChaCha8Rng);

    /// Gradient-noise covariance `S(θ) = Cov(Λ(θ, ·))`, symmetric PSD.
    /// Analytic where a closed form exists, otherwise evaluated from the
    /// instance's fixed quadrature cache (deterministic either way).
    fn noise_covariance(&self, theta: &[f64]) -> DMatrix<f64>;

    /// Minimizer in the *original* (uncentered) parameterization; the
    /// offset added to centered estimates when reporting.
    fn theta_star(&self) -> Vec<f64>;

    /// Declared flatness class: the exponent `r ∈ [0, 1/2]` for which the
    /// gradient-domination bound `f^{-r}|∇f| ≥ m > 0` is claimed to hold at
    /// infinity, if any (`1/2` is the strongly convex case).
    fn kl_exponent(&self) -> Option<f64>;

    /// Stable registry key used by configuration files and reports.
    fn name(&self) -> &'static str;

    /// Convenience allocating wrapper around [`Problem::gradient_into`].
    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.gradient_into(theta, &mut out);
        out
    }
}

/// Numerically stable logistic sigmoid `1/(1+e^{-s})`.
#[inline]
pub(crate) fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softplus `ln(1+e^s)`.
#[inline]
pub(crate) fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Uniform draw from the centered ball of the given radius, written into
/// `out`: `d` standard normals give the direction, `U^{1/d}` the radius.
pub(crate) fn sample_in_ball(radius: f64, out: &mut [f64], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let d = out.len();
    loop {
        let mut norm_sq = 0.0;
        for o in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *o = z;
            norm_sq += z * z;
        }
        if norm_sq > 0.0 {
            let u: f64 = rng.random();
            let scale = radius * u.powf(1.0 / d as f64) / norm_sq.sqrt();
            for o in out.iter_mut() {
                *o *= scale;
            }
            return;
        }
    }
}

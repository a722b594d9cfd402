//! Logarithmic-growth counterexample: `f(x) = c·ln(1 + x²)` with additive
//! Gaussian gradient noise.
//!
//! The gradient `2cx/(1+x²)` vanishes at infinity, so no gradient-domination
//! bound `f^{-r}|∇f| ≥ m > 0` holds for any `r ≥ 0`: this instance exists to
//! demonstrate that the landscape checkers reject it (decaying direction
//! minima, drift quantity sinking below any fixed floor at large `|x|`).

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Problem;

/// `f(x) = scale·ln(1+x²)`, one-dimensional, noise `N(0, noise_sd²)`.
pub struct LogGrowthProblem {
    scale: f64,
    noise_sd: f64,
}

impl LogGrowthProblem {
    pub fn new(scale: f64, noise_sd: f64) -> Self {
        assert!(scale > 0.0 && noise_sd >= 0.0);
        Self { scale, noise_sd }
    }
}

impl Default for LogGrowthProblem {
    /// The documented instance used by the checker tests: `0.01·ln(1+x²)`
    /// with noise standard deviation `0.1`.
    fn default() -> Self {
        Self::new(0.01, 0.1)
    }
}

impl Problem for LogGrowthProblem {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.scale * (theta[0] * theta[0]).ln_1p()
    }

    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        let x = theta[0];
        out[0] = 2.0 * self.scale * x / (1.0 + x * x);
    }

    fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let x2 = theta[0] * theta[0];
        let denom = (1.0 + x2) * (1.0 + x2);
        DMatrix::from_element(1, 1, 2.0 * self.scale * (1.0 - x2) / denom)
    }

    fn sample_gradient_into(&self, theta: &[f64], out: &mut [f64], rng: &mut ChaCha8Rng) {
        self.gradient_into(theta, out);
        if self.noise_sd > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            out[0] += self.noise_sd * z;
        }
    }

    fn noise_covariance(&self, _theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.noise_sd * self.noise_sd)
    }

    fn theta_star(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn kl_exponent(&self) -> Option<f64> {
        // No gradient-domination class is claimed: the gradient decays.
        None
    }

    fn name(&self) -> &'static str {
        "log-growth"
    }
}

//! Linear least squares: quadratic objective `f(η) = ½ηᵀHη` with symmetric
//! positive-definite `H` and additive Gaussian gradient noise of constant
//! covariance `S₀` (possibly singular or zero).
//!
//! This is the strongly convex benchmark: the smallest eigenvalue of the
//! (constant) Hessian is a global curvature bound, and with `H = I` the
//! asymptotic covariance is exactly `S₀`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::Problem;

#[derive(Debug, Error, PartialEq)]
pub enum LeastSquaresError {
    #[error("matrices must be square of the parameter dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must be symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("H must be positive definite (eigenvalue {0:.6e})")]
    NotPositiveDefinite(f64),
    #[error("S0 must be positive semidefinite (eigenvalue {0:.6e})")]
    NotPsd(f64),
}

/// `f(η) = ½ηᵀHη` with gradient noise `N(0, S₀)`.
pub struct LeastSquaresProblem {
    dim: usize,
    theta_star: Vec<f64>,
    /// Row-major `H`.
    h: Vec<f64>,
    /// A factor `L` with `LLᵀ = S₀` (empty when `S₀ = 0`), row-major.
    noise_factor: Vec<f64>,
    h_mat: DMatrix<f64>,
    s0_mat: DMatrix<f64>,
    min_eig_h: f64,
}

impl LeastSquaresProblem {
    pub fn new(
        h: DMatrix<f64>,
        s0: DMatrix<f64>,
        theta_star: Vec<f64>,
    ) -> Result<Self, LeastSquaresError> {
        let d = theta_star.len();
        for m in [&h, &s0] {
            if m.nrows() != d || m.ncols() != d {
                return Err(LeastSquaresError::DimensionMismatch {
                    expected: d,
                    got: m.nrows().max(m.ncols()),
                });
            }
            let asym = (m - m.transpose()).norm();
            if asym > 1e-12 * (1.0 + m.norm()) {
                return Err(LeastSquaresError::NotSymmetric(asym));
            }
        }

        let h_eigs = h.symmetric_eigenvalues();
        let min_eig_h = h_eigs.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig_h <= 0.0 {
            return Err(LeastSquaresError::NotPositiveDefinite(min_eig_h));
        }

        // Factor S0 = L Lᵀ through its eigendecomposition so that singular
        // PSD covariances (including zero) are accepted.
        let tol = 1e-12 * (1.0 + s0.norm());
        let mut noise_factor = Vec::new();
        if s0.iter().any(|&v| v != 0.0) {
            let eig = s0.clone().symmetric_eigen();
            let mut l = DMatrix::zeros(d, d);
            for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
                if lambda < -tol {
                    return Err(LeastSquaresError::NotPsd(lambda));
                }
                let scale = lambda.max(0.0).sqrt();
                for i in 0..d {
                    l[(i, j)] = scale * eig.eigenvectors[(i, j)];
                }
            }
            noise_factor = (0..d * d).map(|k| l[(k / d, k % d)]).collect();
        }

        let h_flat = (0..d * d).map(|k| h[(k / d, k % d)]).collect();
        Ok(Self {
            dim: d,
            theta_star,
            h: h_flat,
            noise_factor,
            h_mat: h,
            s0_mat: s0,
            min_eig_h,
        })
    }

    /// One-dimensional convenience constructor.
    pub fn scalar(h: f64, s0: f64, theta_star: f64) -> Result<Self, LeastSquaresError> {
        Self::new(
            DMatrix::from_element(1, 1, h),
            DMatrix::from_element(1, 1, s0),
            vec![theta_star],
        )
    }

    /// Global curvature bound: the smallest eigenvalue of `H`.
    pub fn min_curvature(&self) -> f64 {
        self.min_eig_h
    }

    #[inline]
    fn h_matvec(&self, theta: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.h.chunks_exact(self.dim)) {
            *o = super::dot(row, theta);
        }
    }
}

impl Problem for LeastSquaresProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            let row = &self.h[i * d..(i + 1) * d];
            acc += theta[i] * super::dot(row, theta);
        }
        0.5 * acc
    }

    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        self.h_matvec(theta, out);
    }

    fn hessian(&self, _theta: &[f64]) -> DMatrix<f64> {
        self.h_mat.clone()
    }

    fn sample_gradient_into(&self, theta: &[f64], out: &mut [f64], rng: &mut ChaCha8Rng) {
        let d = self.dim;
        self.h_matvec(theta, out);
        if !self.noise_factor.is_empty() {
            // out += L z, applied column by column so no scratch is needed.
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                for (o, l_row) in out.iter_mut().zip(self.noise_factor.chunks_exact(d)) {
                    *o += l_row[j] * z;
                }
            }
        }
    }

    fn noise_covariance(&self, _theta: &[f64]) -> DMatrix<f64> {
        self.s0_mat.clone()
    }

    fn theta_star(&self) -> Vec<f64> {
        self.theta_star.clone()
    }

    fn kl_exponent(&self) -> Option<f64> {
        Some(0.5)
    }

    fn name(&self) -> &'static str {
        "least-squares"
    }
}

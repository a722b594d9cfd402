//! Synthetic logistic regression: design `X` uniform in a centered ball,
//! labels `Y ∈ {−1,+1}` drawn from the logistic model at the true
//! parameter, objective `f(θ) = E[log(1 + e^{−Y⟨X,θ⟩})]`.
//!
//! The objective has no closed form; `value`, `gradient`, `hessian` and
//! `noise_covariance` are evaluated by averaging over a fixed-seed cache of
//! design draws (Monte Carlo quadrature, deterministic per instance). The
//! expectation over the label is taken analytically, so only the design
//! integral is sampled. The cache is a reference oracle — the per-step
//! stochastic gradient never touches it.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dot, sample_in_ball, sigmoid, softplus, Problem};
use crate::kahan::KahanSum;

/// Default number of cached design draws for the quadrature oracles.
pub const DEFAULT_QUADRATURE_DRAWS: usize = 1_000_000;

/// Fixed seed of the quadrature cache. Changing it changes every quadrature
/// oracle (but no stochastic-gradient stream), so it is a documented
/// constant rather than a configuration knob.
pub const DEFAULT_CACHE_SEED: u64 = 0x6c6f_6769_7374_6963; // ASCII "logistic"

/// One stochastic-gradient draw for logistic loss as a pure function of the
/// sample: `Λ(θ, (x,y)) = −y·x·σ(−y⟨x,θ⟩)`, evaluated overflow-safe.
///
/// `θ` here is in the *original* parameterization (the loss is defined
/// against raw data), and `y` must be `±1`.
pub fn logistic_score(theta: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
    debug_assert!(y == 1.0 || y == -1.0);
    let s = dot(x, theta);
    let w = -y * sigmoid(-y * s);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = w * xi;
    }
}

/// Logistic regression on a synthetic ball-supported design.
pub struct LogisticProblem {
    theta_star: Vec<f64>,
    radius: f64,
    dim: usize,
    /// Cached design draws, row-major `draws × dim`.
    xs: Vec<f64>,
    /// `σ(⟨x, θ*⟩)` per cached draw: the label-one probability.
    p_plus: Vec<f64>,
    /// Quadrature value of the uncentered objective at `θ*`.
    f_star: f64,
    cache_seed: u64,
}

impl LogisticProblem {
    /// Default instance: full-size quadrature cache with the documented
    /// fixed seed.
    pub fn new(theta_star: Vec<f64>, radius: f64) -> Self {
        Self::with_quadrature(theta_star, radius, DEFAULT_QUADRATURE_DRAWS, DEFAULT_CACHE_SEED)
    }

    /// Instance with an explicit cache size and seed. Smaller caches trade
    /// oracle accuracy for speed (useful in step-by-step replay tests);
    /// different seeds give independent quadrature estimates of the same
    /// problem.
    pub fn with_quadrature(
        theta_star: Vec<f64>,
        radius: f64,
        quadrature_draws: usize,
        cache_seed: u64,
    ) -> Self {
        assert!(radius > 0.0 && radius.is_finite(), "radius must be positive");
        assert!(!theta_star.is_empty(), "parameter dimension must be positive");
        assert!(quadrature_draws >= 2, "need at least two quadrature draws");
        let dim = theta_star.len();
        let mut rng = ChaCha8Rng::seed_from_u64(cache_seed);
        let mut xs = vec![0.0; quadrature_draws * dim];
        let mut p_plus = vec![0.0; quadrature_draws];
        for k in 0..quadrature_draws {
            let row = &mut xs[k * dim..(k + 1) * dim];
            sample_in_ball(radius, row, &mut rng);
            p_plus[k] = sigmoid(dot(row, &theta_star));
        }
        let mut this = Self {
            theta_star,
            radius,
            dim,
            xs,
            p_plus,
            f_star: 0.0,
            cache_seed,
        };
        this.f_star = this.quadrature_value_uncentered(&this.theta_star);
        this
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cache_seed(&self) -> u64 {
        self.cache_seed
    }

    pub fn quadrature_draws(&self) -> usize {
        self.p_plus.len()
    }

    fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.xs.chunks_exact(self.dim).zip(self.p_plus.iter().copied())
    }

    /// `E[log(1+e^{−Y⟨X,θ⟩})]` with the label expectation analytic:
    /// `p₊·softplus(−s) + (1−p₊)·softplus(s)` at `s = ⟨x,θ⟩`.
    fn quadrature_value_uncentered(&self, theta: &[f64]) -> f64 {
        let mut acc = KahanSum::new();
        for (x, p) in self.rows() {
            let s = dot(x, theta);
            acc.add(p * softplus(-s) + (1.0 - p) * softplus(s));
        }
        acc.value() / self.quadrature_draws() as f64
    }

    fn uncentered(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.theta_star)
            .map(|(t, s)| t + s)
            .collect()
    }
}

impl Problem for LogisticProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.quadrature_value_uncentered(&self.uncentered(theta)) - self.f_star
    }

    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        let public = self.uncentered(theta);
        let mut acc = vec![KahanSum::new(); self.dim];
        for (x, p) in self.rows() {
            let s = dot(x, &public);
            // E_Y[−Y σ(−Ys)] = −p σ(−s) + (1−p) σ(s)
            let w = -p * sigmoid(-s) + (1.0 - p) * sigmoid(s);
            for (a, xi) in acc.iter_mut().zip(x) {
                a.add(w * xi);
            }
        }
        let n = self.quadrature_draws() as f64;
        for (o, a) in out.iter_mut().zip(&acc) {
            *o = a.value() / n;
        }
    }

    fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let public = self.uncentered(theta);
        let d = self.dim;
        let mut acc = vec![KahanSum::new(); d * d];
        for (x, _) in self.rows() {
            let s = dot(x, &public);
            // d/ds σ(s) = σ(s)σ(−s), label-independent.
            let w = sigmoid(s) * sigmoid(-s);
            for i in 0..d {
                for j in 0..d {
                    acc[i * d + j].add(w * x[i] * x[j]);
                }
            }
        }
        let n = self.quadrature_draws() as f64;
        DMatrix::from_fn(d, d, |i, j| acc[i * d + j].value() / n)
    }

    fn sample_gradient_into(&self, theta: &[f64], out: &mut [f64], rng: &mut ChaCha8Rng) {
        use rand::Rng;
        // Draw x into `out`, then rescale in place by the score weight.
        sample_in_ball(self.radius, out, rng);
        let s_star = dot(out, &self.theta_star);
        let y = if rng.random::<f64>() < sigmoid(s_star) {
            1.0
        } else {
            -1.0
        };
        let s = s_star + dot(out, theta);
        let w = -y * sigmoid(-y * s);
        for o in out.iter_mut() {
            *o *= w;
        }
    }

    fn noise_covariance(&self, theta: &[f64]) -> DMatrix<f64> {
        let public = self.uncentered(theta);
        let d = self.dim;
        let mut acc = vec![KahanSum::new(); d * d];
        for (x, p) in self.rows() {
            let s = dot(x, &public);
            // E_Y[Λ Λᵀ] weight: p σ(−s)² + (1−p) σ(s)².
            let (sp, sm) = (sigmoid(s), sigmoid(-s));
            let w = p * sm * sm + (1.0 - p) * sp * sp;
            for i in 0..d {
                for j in 0..d {
                    acc[i * d + j].add(w * x[i] * x[j]);
                }
            }
        }
        let n = self.quadrature_draws() as f64;
        let second_moment = DMatrix::from_fn(d, d, |i, j| acc[i * d + j].value() / n);
        let g = DMatrix::from_column_slice(d, 1, &self.gradient(theta));
        second_moment - &g * g.transpose()
    }

    fn theta_star(&self) -> Vec<f64> {
        self.theta_star.clone()
    }

    fn kl_exponent(&self) -> Option<f64> {
        Some(0.0)
    }

    fn name(&self) -> &'static str {
        "logistic-synthetic"
    }
}

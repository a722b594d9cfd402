//! Stochastic approximation with Ruppert-Polyak averaging.
//!
//! The crate provides:
//!
//! * polynomial step schedules `γ_n = γ n^{-β}` together with deterministic
//!   verification of the sequence bounds they obey ([`schedule`]),
//! * benchmark problem oracles — online quantile estimation, synthetic
//!   logistic regression, linear least squares — exposing exact values,
//!   gradients, Hessians and unbiased stochastic gradients ([`problems`]),
//! * the Robbins-Monro iteration with online averaging ([`sgd`]),
//! * Lyapunov-function and landscape assumption checkers, including a
//!   gradient-flow growth verifier ([`assumptions`]),
//! * the spectral machinery around `Σ* = H^{-1} S* H^{-1}` and a coupled
//!   2d-dimensional replay of the iterate/average pair ([`spectral`]),
//! * a deterministic parallel replication engine with MSE curve estimation
//!   and log-log rate fitting ([`montecarlo`]).
//!
//! # Example
//!
//! Estimate the median of `N(0, 1)` with averaged SGD and compare the scaled
//! terminal error to the exact asymptotic covariance trace `Tr(Σ*) = π/2`:
//!
//! ```
//! use rpavg_core::montecarlo::{run_experiment, EstimatorSelection, ExperimentConfig};
//! use rpavg_core::problems::QuantileProblem;
//! use rpavg_core::schedule::StepSchedule;
//! use rpavg_core::spectral::compute_sigma_star;
//!
//! let problem = QuantileProblem::normal(0.5, 0.0, 1.0)?;
//! let config = ExperimentConfig {
//!     schedule: StepSchedule::new(2.0, 0.75)?,
//!     theta0: vec![0.0],
//!     n_max: 10_000,
//!     replications: 200,
//!     master_seed: 7,
//!     points_per_decade: 10,
//!     estimator: EstimatorSelection::Averaged,
//! };
//! let output = run_experiment(&problem, &config)?;
//! let trace = compute_sigma_star(&problem)?.trace_sigma;
//!
//! let curve = &output.curves[0];
//! let ratio = curve.n_times_mse.last().unwrap() / trace;
//! assert!((0.7..=1.3).contains(&ratio), "n·mse/Tr(Σ*) = {ratio}");
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! All problems are expressed in coordinates centered at their minimizer:
//! the origin is the optimum, `value(0) = 0`, and the public-coordinate
//! location of the optimum is reported separately by
//! [`problems::Problem::theta_star`]. Estimates map back to original
//! coordinates by adding that offset. This makes error curves exactly
//! invariant under translating a problem, and keeps every diagnostic
//! (Lyapunov functions, flow integration, spectral shears) free of offset
//! bookkeeping.

pub mod assumptions;
pub mod fit;
pub mod kahan;
pub mod montecarlo;
pub mod problems;
pub mod rng;
pub mod schedule;
pub mod sgd;
pub mod spectral;

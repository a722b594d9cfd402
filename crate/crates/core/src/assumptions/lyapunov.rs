//! The Lyapunov function `V_p(x) = f(x)^p · e^{φ(f(x))}` and its closed-form
//! derivatives.
//!
//! With `ψ₁(t) = p/t + φ′(t)` and `ψ₂(t) = ψ₁(t)² − p/t² + φ″(t)`:
//!
//! - `∇V_p = V_p · ψ₁(f) ∇f`
//! - `D²V_p = V_p · [ψ₂(f) ∇f∇fᵀ + ψ₁(f) D²f]`
//!
//! The `1/f` terms are removable at the minimizer (where `f → 0`
//! quadratically) but the expressions are 0/0 there, so the closed forms are
//! refused inside a radius of `10⁻⁸`; callers fall back to finite
//! differences in that ball.

use nalgebra::DMatrix;
use thiserror::Error;

use super::phi::PhiFunction;
use crate::problems::Problem;

/// Radius around the minimizer inside which the closed forms are disabled.
pub const SINGULAR_RADIUS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Error, PartialEq)]
#[error("closed-form derivative is singular within {SINGULAR_RADIUS:e} of the minimizer")]
pub struct NearMinimizer;

/// `V_p(x) = f(x)^p e^{φ(f(x))}`. Defined everywhere; zero exactly at the
/// minimizer.
pub fn lyapunov_value<P: Problem + ?Sized>(
    problem: &P,
    phi: PhiFunction,
    p: f64,
    x: &[f64],
) -> f64 {
    debug_assert!(p >= 1.0);
    let f = problem.value(x);
    f.powf(p) * phi.value(f).exp()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn psi1(phi: PhiFunction, p: f64, f: f64) -> f64 {
    p / f + phi.deriv(f)
}

fn psi2(phi: PhiFunction, p: f64, f: f64) -> f64 {
    let s1 = psi1(phi, p, f);
    s1 * s1 - p / (f * f) + phi.second_deriv(f)
}

/// `∇V_p(x) = V_p(x) ψ₁(f(x)) ∇f(x)`; closed form away from the minimizer.
pub fn lyapunov_gradient<P: Problem + ?Sized>(
    problem: &P,
    phi: PhiFunction,
    p: f64,
    x: &[f64],
) -> Result<Vec<f64>, NearMinimizer> {
    if norm(x) <= SINGULAR_RADIUS {
        return Err(NearMinimizer);
    }
    let f = problem.value(x);
    let v = f.powf(p) * phi.value(f).exp();
    let scale = v * psi1(phi, p, f);
    Ok(problem.gradient(x).into_iter().map(|g| scale * g).collect())
}

/// `D²V_p(x) = V_p[ψ₂ ∇f∇fᵀ + ψ₁ D²f]`; closed form away from the minimizer.
pub fn lyapunov_hessian<P: Problem + ?Sized>(
    problem: &P,
    phi: PhiFunction,
    p: f64,
    x: &[f64],
) -> Result<DMatrix<f64>, NearMinimizer> {
    if norm(x) <= SINGULAR_RADIUS {
        return Err(NearMinimizer);
    }
    let f = problem.value(x);
    let v = f.powf(p) * phi.value(f).exp();
    let grad = problem.gradient(x);
    let d = grad.len();
    let s1 = psi1(phi, p, f);
    let s2 = psi2(phi, p, f);
    let mut out = problem.hessian(x);
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = v * (s2 * grad[i] * grad[j] + s1 * out[(i, j)]);
        }
    }
    Ok(out)
}

/// The normalized descent alignment `⟨∇V_p, ∇f⟩ / V_p = ψ₁(f)|∇f|²`.
///
/// Strict positivity over a sampling grid is the discrete form of the
/// drift condition that powers the step-wise decrease of `E[V_p]`.
pub fn descent_alignment<P: Problem + ?Sized>(
    problem: &P,
    phi: PhiFunction,
    p: f64,
    x: &[f64],
) -> Result<f64, NearMinimizer> {
    if norm(x) <= SINGULAR_RADIUS {
        return Err(NearMinimizer);
    }
    let f = problem.value(x);
    let grad_sq: f64 = problem.gradient(x).iter().map(|g| g * g).sum();
    Ok(psi1(phi, p, f) * grad_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{
        LeastSquaresProblem, LogisticProblem, QuantileProblem,
    };
    use crate::problems::sample_in_ball;
    use crate::rng::replication_rng;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use std::f64::consts::E;

    fn quadratic() -> LeastSquaresProblem {
        // f(x) = x^2 in centered coordinates.
        LeastSquaresProblem::scalar(2.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn value_examples() {
        let p = quadratic();
        let v = lyapunov_value(&p, PhiFunction::One, 1.0, &[2.0]);
        assert_abs_diff_eq!(v, 4.0 * E, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 10.87312731383618, epsilon = 1e-12);

        let sqrt = PhiFunction::power(0.0).unwrap();
        let v0 = lyapunov_value(&p, sqrt, 1.0, &[1.0]);
        assert_abs_diff_eq!(v0, 2f64.sqrt().exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(v0, 4.113250378782928, epsilon = 1e-12);

        for order in [1.0, 2.0, 3.0] {
            assert_eq!(lyapunov_value(&p, sqrt, order, &[0.0]), 0.0);
        }
    }

    #[test]
    fn symbolic_gradient_and_hessian_for_the_quadratic() {
        let p = quadratic();
        // p = 1, phi = 1: V = e x^2, so V' = 2ex and V'' = 2e; the psi_2
        // coefficient cancels exactly.
        let g = lyapunov_gradient(&p, PhiFunction::One, 1.0, &[1.5]).unwrap();
        assert_abs_diff_eq!(g[0], 3.0 * E, epsilon = 1e-12);
        let h = lyapunov_hessian(&p, PhiFunction::One, 1.0, &[1.5]).unwrap();
        assert_abs_diff_eq!(h[(0, 0)], 2.0 * E, epsilon = 1e-12);
        // p = 2: V = e x^4, V' = 4ex^3, V'' = 12ex^2.
        let g2 = lyapunov_gradient(&p, PhiFunction::One, 2.0, &[1.5]).unwrap();
        assert_abs_diff_eq!(g2[0], 4.0 * E * 1.5f64.powi(3), epsilon = 1e-9);
        let h2 = lyapunov_hessian(&p, PhiFunction::One, 2.0, &[1.5]).unwrap();
        assert_abs_diff_eq!(h2[(0, 0)], 12.0 * E * 2.25, epsilon = 1e-9);
    }

    #[test]
    fn closed_forms_refuse_the_singular_ball() {
        let p = quadratic();
        let sqrt = PhiFunction::power(0.0).unwrap();
        assert_eq!(
            lyapunov_gradient(&p, sqrt, 1.0, &[1e-9]).unwrap_err(),
            NearMinimizer
        );
        assert_eq!(
            lyapunov_hessian(&p, sqrt, 1.0, &[1e-9]).unwrap_err(),
            NearMinimizer
        );
        assert_eq!(
            descent_alignment(&p, sqrt, 1.0, &[0.0]).unwrap_err(),
            NearMinimizer
        );
        assert!(lyapunov_gradient(&p, sqrt, 1.0, &[1e-7]).is_ok());
    }

    /// Central finite differences of V_p against the closed-form gradient,
    /// and of the closed-form gradient against the closed-form Hessian.
    fn assert_derivatives_em<P: Problem + ?Sized>(
        problem: &P,
        phi: PhiFunction,
        p: f64,
        x: &[f64],
    ) {
        let d = x.len();
        let grad = lyapunov_gradient(problem, phi, p, x).unwrap();
        let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let mut xp = x.to_vec();
        for i in 0..d {
            let h = 1e-5 * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let up = lyapunov_value(problem, phi, p, &xp);
            xp[i] = x[i] - h;
            let dn = lyapunov_value(problem, phi, p, &xp);
            xp[i] = x[i];
            let fd = (up - dn) / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() <= 1e-5 * scale.max(fd.abs()).max(1e-10),
                "gradient mismatch at {x:?}: closed {} vs fd {fd}",
                grad[i]
            );
        }
        let hess = lyapunov_hessian(problem, phi, p, x).unwrap();
        let hscale = hess.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for j in 0..d {
            let h = 1e-5 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            let up = lyapunov_gradient(problem, phi, p, &xp).unwrap();
            xp[j] = x[j] - h;
            let dn = lyapunov_gradient(problem, phi, p, &xp).unwrap();
            xp[j] = x[j];
            for i in 0..d {
                let fd = (up[i] - dn[i]) / (2.0 * h);
                assert!(
                    (hess[(i, j)] - fd).abs() <= 1e-5 * hscale.max(1e-10),
                    "hessian mismatch at {x:?} entry ({i},{j}): closed {} vs fd {fd}",
                    hess[(i, j)]
                );
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences_across_problems() {
        let sqrt = PhiFunction::power(0.0).unwrap();
        let mid = PhiFunction::power(0.25).unwrap();
        let quantile = QuantileProblem::standard_normal(0.5).unwrap();
        let ls = LeastSquaresProblem::new(
            DMatrix::from_row_slice(2, 2, &[1.5, 0.25, 0.25, 0.75]),
            DMatrix::identity(2, 2),
            vec![0.0, 0.0],
        )
        .unwrap();
        // Reduced quadrature cache keeps the 1e4-draw value/gradient sums
        // cheap enough for repeated finite differencing.
        let logistic = LogisticProblem::with_quadrature(vec![1.0, -0.5], 4.0, 10_000, 0x6c6f_7465);

        let mut rng = replication_rng(161, 0);
        let mut checked = 0;
        let mut x1 = vec![0.0];
        let mut x2 = vec![0.0, 0.0];
        while checked < 50 {
            sample_in_ball(3.0, &mut x1, &mut rng);
            sample_in_ball(3.0, &mut x2, &mut rng);
            if x1[0].abs() < 1e-3 || x2.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-3 {
                continue;
            }
            for (phi, p) in [(PhiFunction::One, 1.0), (sqrt, 1.0), (mid, 2.0)] {
                assert_derivatives_em(&quantile, phi, p, &x1);
                assert_derivatives_em(&ls, phi, p, &x2);
            }
            assert_derivatives_em(&logistic, PhiFunction::One, 1.0, &x2);
            checked += 1;
        }
    }

    #[test]
    fn descent_alignment_is_positive_on_benchmark_grids() {
        let sqrt = PhiFunction::power(0.0).unwrap();
        let quantile = QuantileProblem::standard_normal(0.3).unwrap();
        let ls = LeastSquaresProblem::scalar(1.0, 1.0, 0.0).unwrap();
        let mut worst = f64::INFINITY;
        for k in 1..=400 {
            let x = [k as f64 * 0.0125]; // (0, 5]
            for sign in [-1.0, 1.0] {
                let pt = [sign * x[0]];
                worst = worst.min(descent_alignment(&quantile, sqrt, 1.0, &pt).unwrap());
                worst = worst.min(descent_alignment(&ls, PhiFunction::One, 2.0, &pt).unwrap());
            }
        }
        assert!(worst > 0.0, "alignment grid minimum {worst}");
        assert!(worst > 1e-3, "alignment uncomfortably small: {worst}");
    }
}

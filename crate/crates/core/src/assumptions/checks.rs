//! Empirical checkers for the structural conditions behind the convergence
//! guarantees: the drift bounds on `φ′(f)|∇f|² + |∇f|²/f`, the at-infinity
//! gradient-domination ratio `f^{−r}|∇f|`, the exponential noise moments,
//! and the step-wise descent of `E[V_p]`.
//!
//! All checkers sample: they certify behaviour on explicit grids and note
//! that grids are surrogates for the continuum statements. Reports
//! serialize to JSON with the checker name, grid summary, estimates,
//! violation points, and the verdict.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::lyapunov::lyapunov_value;
use super::phi::PhiFunction;
use crate::kahan::KahanSum;
use crate::problems::Problem;
use crate::rng::replication_rng;
use crate::schedule::{geometric_index_grid, StepSchedule};
use crate::sgd::RunState;

/// Default lower bound demanded of the drift quantity: estimates at or
/// below this are flagged as violations even when positive, since a
/// vanishing drift floor destroys the descent argument in the same way a
/// sign change would.
pub const DEFAULT_DRIFT_FLOOR: f64 = 1e-4;

/// Minimum distance from the minimizer for drift-grid points.
pub const REGION_EXCLUSION: f64 = 1e-6;

/// Sampling region for the drift checker: in one dimension a symmetric
/// deterministic grid on `±[exclusion, radius]` (endpoints included); in
/// higher dimension `count` points with uniform random directions and
/// log-uniform radii.
pub fn region_points(
    dim: usize,
    exclusion: f64,
    radius: f64,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    assert!(dim >= 1 && count >= 2);
    assert!(exclusion >= REGION_EXCLUSION && radius > exclusion);
    if dim == 1 {
        let mut pts = Vec::with_capacity(2 * count);
        for k in 0..count {
            let x = exclusion + (radius - exclusion) * k as f64 / (count - 1) as f64;
            pts.push(vec![-x]);
            pts.push(vec![x]);
        }
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
        return pts;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_ratio = (radius / exclusion).ln();
    (0..count)
        .map(|k| {
            let mut dir: Vec<f64> = (0..dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let u = (k as f64 + 0.5) / count as f64;
            let rho = exclusion * (u * log_ratio).exp();
            dir.iter_mut().for_each(|v| *v *= rho / norm);
            dir
        })
        .collect()
}

/// A grid point where a checker's quantity was non-finite or at/below its
/// floor.
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Result of the drift check: extremes of `φ′(f)|∇f|² + |∇f|²/f` over the
/// grid, plus the eventual-concavity threshold of `φ`.
#[derive(Clone, Debug, Serialize)]
pub struct HphiReport {
    pub checker: &'static str,
    pub grid_points: usize,
    pub floor: f64,
    pub m_hat: f64,
    #[serde(rename = "M_hat")]
    pub m_upper_hat: f64,
    pub concavity_threshold: Option<f64>,
    pub violations: Vec<Violation>,
    pub pass: bool,
}

/// Evaluates `Ψ(x) = φ′(f(x))|∇f(x)|² + |∇f(x)|²/f(x)` over the supplied
/// points (all at distance `> 10⁻⁶` from the minimizer) and reports the
/// extremes. Passes when every evaluation is finite and above `floor`, and
/// `φ` is eventually concave in the relaxed sense.
pub fn check_h_phi<P: Problem + ?Sized>(
    problem: &P,
    phi: PhiFunction,
    points: &[Vec<f64>],
    floor: f64,
) -> HphiReport {
    assert!(!points.is_empty());
    let mut m_hat = f64::INFINITY;
    let mut m_upper = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for x in points {
        let dist = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(
            dist >= REGION_EXCLUSION,
            "sampling region must exclude the open {REGION_EXCLUSION:e}-ball around the minimizer"
        );
        let f = problem.value(x);
        let grad_sq: f64 = problem.gradient(x).iter().map(|g| g * g).sum();
        let psi = phi.deriv(f) * grad_sq + grad_sq / f;
        if !psi.is_finite() || psi <= floor {
            violations.push(Violation {
                point: x.clone(),
                value: psi,
            });
        }
        if psi.is_finite() {
            m_hat = m_hat.min(psi);
            m_upper = m_upper.max(psi);
        }
    }
    let concavity_threshold = phi.eventual_concavity_threshold();
    let pass = violations.is_empty()
        && m_hat > floor
        && m_upper.is_finite()
        && concavity_threshold.is_some();
    HphiReport {
        checker: "h-phi",
        grid_points: points.len(),
        floor,
        m_hat,
        m_upper_hat: m_upper,
        concavity_threshold,
        violations,
        pass,
    }
}

/// Result of the gradient-domination check along rays.
#[derive(Clone, Debug, Serialize)]
pub struct KlReport {
    pub checker: &'static str,
    pub r: f64,
    pub directions: usize,
    pub radii: Vec<f64>,
    /// Minimum of `f^{−r}|∇f|` over the direction set, per radius.
    pub estimates: Vec<f64>,
    /// The estimate at the largest radius: the grid surrogate for the
    /// at-infinity lim-inf.
    pub liminf_estimate: f64,
    pub pass: bool,
}

/// Estimates `min_direction f(ρu)^{−r} |∇f(ρu)|` at each radius `ρ` using a
/// fixed direction set (the coordinate axes plus at least 64 random unit
/// vectors). Passes when the last three radius estimates are non-decreasing
/// within 5% and stay above `10⁻⁶`.
pub fn check_h_kl<P: Problem + ?Sized>(
    problem: &P,
    r: f64,
    radii: &[f64],
    seed: u64,
) -> KlReport {
    assert!(radii.len() >= 3, "need at least three radii");
    assert!(
        radii.windows(2).all(|w| w[0] < w[1]) && radii[0] > 0.0,
        "radii must be positive and increasing"
    );
    let d = problem.dim();
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut axis = vec![0.0; d];
            axis[i] = sign;
            directions.push(axis);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_count = 64.max(2 * d);
    for _ in 0..random_count {
        loop {
            let mut u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                u.iter_mut().for_each(|v| *v /= norm);
                directions.push(u);
                break;
            }
        }
    }

    let mut estimates = Vec::with_capacity(radii.len());
    for &rho in radii {
        let mut min_ratio = f64::INFINITY;
        for u in &directions {
            let x: Vec<f64> = u.iter().map(|v| v * rho).collect();
            let f = problem.value(&x);
            let grad_norm = problem
                .gradient(&x)
                .iter()
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            min_ratio = min_ratio.min(f.powf(-r) * grad_norm);
        }
        estimates.push(min_ratio);
    }
    let tail = &estimates[estimates.len() - 3..];
    let pass = tail.windows(2).all(|w| w[1] >= 0.95 * w[0])
        && tail.iter().all(|v| v.is_finite() && *v >= 1e-6);
    KlReport {
        checker: "h-kl",
        r,
        directions: directions.len(),
        radii: radii.to_vec(),
        liminf_estimate: *estimates.last().unwrap(),
        estimates,
        pass,
    }
}

/// Empirical table of `ρ_p(u) = E[|ΔM|^{2p+2} e^{φ(u|ΔM|²)}]` over a grid of
/// evaluation points and `u` values, where `ΔM = ∇f(θ) − Λ(θ, Z)` is the
/// score noise.
#[derive(Clone, Debug, Serialize)]
pub struct NoiseMomentReport {
    pub checker: &'static str,
    pub p: f64,
    pub draws: usize,
    pub theta_points: Vec<Vec<f64>>,
    pub u_grid: Vec<f64>,
    /// `table[i][j]` is the estimate at `theta_points[i]`, `u_grid[j]`.
    pub table: Vec<Vec<f64>>,
    pub max_entry: f64,
    /// Indices `(i, j)` whose estimate overflowed to non-finite values
    /// (heavy-tail flag).
    pub overflow: Vec<(usize, usize)>,
    pub pass: bool,
}

/// Monte Carlo estimate of the exponential noise moments; `draws ≥ 10⁴`
/// per point. Passes when every table entry is finite.
pub fn check_noise_moments<P: Problem + ?Sized>(
    problem: &P,
    phi: PhiFunction,
    p: f64,
    theta_points: &[Vec<f64>],
    u_grid: &[f64],
    draws: usize,
    seed: u64,
) -> NoiseMomentReport {
    assert!(draws >= 10_000, "need at least 1e4 draws per point");
    assert!(!theta_points.is_empty() && !u_grid.is_empty());
    let d = problem.dim();
    let mut table = Vec::with_capacity(theta_points.len());
    let mut overflow = Vec::new();
    let mut max_entry = f64::NEG_INFINITY;
    for (i, theta) in theta_points.iter().enumerate() {
        let mean_grad = problem.gradient(theta);
        let mut sums = vec![KahanSum::new(); u_grid.len()];
        let mut rng = replication_rng(seed, i as u64);
        let mut sample = vec![0.0; d];
        for _ in 0..draws {
            problem.sample_gradient_into(theta, &mut sample, &mut rng);
            let m2: f64 = mean_grad
                .iter()
                .zip(&sample)
                .map(|(g, s)| (g - s) * (g - s))
                .sum();
            let poly = m2.powf(p + 1.0);
            for (j, &u) in u_grid.iter().enumerate() {
                sums[j].add(poly * phi.value(u * m2).exp());
            }
        }
        let row: Vec<f64> = sums.iter().map(|s| s.value() / draws as f64).collect();
        for (j, v) in row.iter().enumerate() {
            if v.is_finite() {
                max_entry = max_entry.max(*v);
            } else {
                overflow.push((i, j));
            }
        }
        table.push(row);
    }
    let pass = overflow.is_empty();
    NoiseMomentReport {
        checker: "noise-moments",
        p,
        draws,
        theta_points: theta_points.to_vec(),
        u_grid: u_grid.to_vec(),
        table,
        max_entry,
        overflow,
        pass,
    }
}

/// Configuration for the descent diagnostic.
#[derive(Clone, Copy, Debug)]
pub struct DescentConfig {
    pub replications: usize,
    pub n_max: u64,
    /// Fitting starts past this index, skipping the transient.
    pub n0: u64,
    pub seed: u64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            replications: 500,
            n_max: 10_000,
            n0: 100,
            seed: 0x6465_7363,
        }
    }
}

/// Result of the descent diagnostic: the normalized curve
/// `E[V_p(θ_n)]/γ_n^p` at geometric checkpoints and the fitted one-step
/// model `E V_{n+1} ≈ (1 − c₁γ_{n+1}) E V_n + c₂ γ_{n+1}^{p+1}`.
#[derive(Clone, Debug, Serialize)]
pub struct DescentReport {
    pub checker: &'static str,
    pub p: f64,
    pub replications: usize,
    pub diverged: usize,
    pub checkpoints: Vec<u64>,
    /// `E[V_p(θ_n)]` at the checkpoints.
    pub values: Vec<f64>,
    /// `E[V_p(θ_n)] / γ_n^p` at the checkpoints.
    pub ratio: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub pass: bool,
    pub offending: Option<u64>,
}

/// Replicates the recursion and tests boundedness of `E[V_p(θ_n)]/γ_n^p`:
/// the terminal ratio may not exceed 1.25× the maximum over the first half
/// of the checkpoint grid. The fitted `(c₁, c₂)` are reported as empirical
/// summaries only — the one-step inequality holds for *some* admissible
/// constants, so no particular magnitudes are asserted.
pub fn descent_diagnostic<P: Problem + ?Sized>(
    problem: &P,
    phi: PhiFunction,
    p: f64,
    schedule: &StepSchedule,
    theta0: &[f64],
    cfg: &DescentConfig,
) -> DescentReport {
    assert!(cfg.replications >= 500, "need at least 500 replications");
    assert!(cfg.n_max >= 10 && cfg.n0 < cfg.n_max);
    let n_max = cfg.n_max as usize;
    let steps = schedule.step_table(cfg.n_max);
    let mut mean_v = vec![KahanSum::new(); n_max];
    let mut v_buf = vec![0.0f64; n_max];
    let mut diverged = 0usize;
    for rep in 0..cfg.replications {
        let mut rng = replication_rng(cfg.seed, rep as u64);
        let mut state = RunState::new(*schedule, theta0, 0);
        let mut ok = true;
        for (k, &gamma) in steps.iter().enumerate() {
            if state.raw_step(gamma, problem, &mut rng).is_err() {
                ok = false;
                break;
            }
            v_buf[k] = lyapunov_value(problem, phi, p, state.theta());
        }
        if ok {
            for (acc, &v) in mean_v.iter_mut().zip(&v_buf) {
                acc.add(v);
            }
        } else {
            diverged += 1;
        }
    }
    let completed = (cfg.replications - diverged) as f64;
    let ev: Vec<f64> = mean_v.iter().map(|s| s.value() / completed.max(1.0)).collect();

    let checkpoints = geometric_index_grid(10.min(cfg.n_max), cfg.n_max, 10);
    let mut values = Vec::with_capacity(checkpoints.len());
    let mut ratio = Vec::with_capacity(checkpoints.len());
    for &n in &checkpoints {
        let v = ev[n as usize - 1];
        values.push(v);
        ratio.push(v / steps[n as usize - 1].powf(p));
    }

    // Two-parameter no-intercept least squares for (c1, c2) on the
    // one-step increments past n0.
    let (mut saa, mut sab, mut sbb, mut say, mut sby) = (
        KahanSum::new(),
        KahanSum::new(),
        KahanSum::new(),
        KahanSum::new(),
        KahanSum::new(),
    );
    for n in cfg.n0 as usize..n_max - 1 {
        let gamma = steps[n];
        let a = -gamma * ev[n - 1];
        let b = gamma.powf(p + 1.0);
        let y = ev[n] - ev[n - 1];
        saa.add(a * a);
        sab.add(a * b);
        sbb.add(b * b);
        say.add(a * y);
        sby.add(b * y);
    }
    let det = saa.value() * sbb.value() - sab.value() * sab.value();
    let (c1, c2) = if det.abs() > 1e-300 && det.is_finite() {
        (
            (say.value() * sbb.value() - sby.value() * sab.value()) / det,
            (sby.value() * saa.value() - say.value() * sab.value()) / det,
        )
    } else {
        (f64::NAN, f64::NAN)
    };

    let mut pass = diverged == 0;
    let mut offending = None;
    if let Some(&bad) = checkpoints
        .iter()
        .zip(&ratio)
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    {
        pass = false;
        offending = Some(bad);
    } else {
        let half = checkpoints.len() / 2;
        let head_max = ratio[..half.max(1)]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let terminal = *ratio.last().unwrap();
        if terminal > 1.25 * head_max {
            pass = false;
            offending = checkpoints.last().copied();
        }
    }

    DescentReport {
        checker: "descent",
        p,
        replications: cfg.replications,
        diverged,
        checkpoints,
        values,
        ratio,
        c1,
        c2,
        pass,
        offending,
    }
}

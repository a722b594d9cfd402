//! Growth certificates from gradient-flow integration.
//!
//! For a problem with unique minimizer at the (centered) origin, integrate
//! the descent flow `χ̇ = −∇f(χ)` from each start point `x` down to the
//! minimizer while accumulating arc length `L = ∫|χ̇| dt`. Along the flow,
//! with `φ̄(a) = a^{1−r}/(1−r)`,
//!
//! `d/dt φ̄(f(χ)) = −f(χ)^{−r} |∇f(χ)| · |χ̇|`,
//!
//! so `φ̄(f(x)) ≥ (min path ratio) · L ≥ (min path ratio) · |x|`. When the
//! domination constant `m` is a sound lower bound for the path ratio this
//! chain yields the growth bound `f(x) ≥ {m(1−r)}^{1/(1−r)} |x|^{1/(1−r)}`;
//! the certificate reports the margin of that bound at each start point.

use serde::Serialize;

use crate::problems::Problem;

/// The desingularizing map `φ̄(a) = a^{1−r}/(1−r)` for `r ∈ [0, 1/2]`
/// (`r = 1/2` is the boundary case, giving `2√a`).
pub fn desingularize(a: f64, r: f64) -> f64 {
    debug_assert!((0.0..=0.5).contains(&r));
    a.powf(1.0 - r) / (1.0 - r)
}

/// Verdict of the flow verifier.
#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowOutcome {
    /// Every flow converged, every chain inequality held, every margin was
    /// at least `−tolerance`.
    Certified,
    /// Flows converged but some growth margin was genuinely negative.
    Refuted,
    /// Some flow did not reach the minimizer within the step budget;
    /// nothing is claimed.
    Inconclusive,
}

/// Per-start-point record.
#[derive(Clone, Debug, Serialize)]
pub struct FlowPoint {
    pub start: Vec<f64>,
    pub converged: bool,
    pub steps: u64,
    /// Arc length of the integrated flow down to the stopping ball.
    pub length: f64,
    pub f_start: f64,
    /// `φ̄(f(start))`.
    pub chain_lhs: f64,
    /// Smallest `f^{−r}|∇f|` seen along the path.
    pub min_ratio: f64,
    /// Pointwise chain inequality `φ̄(f(χ_s)) ≥ (tail min ratio)·(L_T − L_s)`
    /// at every retained sample.
    pub chain_ok: bool,
    /// `f(start) − {m(1−r)}^{1/(1−r)} |start|^{1/(1−r)}`.
    pub margin: f64,
}

/// Certificate over a set of start points.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthCertificate {
    pub checker: &'static str,
    pub r: f64,
    /// Domination constant used for the growth bound (typically a haircut
    /// of the grid lim-inf estimate).
    pub m: f64,
    pub ode_tolerance: f64,
    pub points: Vec<FlowPoint>,
    pub outcome: FlowOutcome,
}

pub(crate) struct Sample {
    pub f: f64,
    pub len: f64,
    pub ratio: f64,
}

pub(crate) struct FlowTrace {
    pub samples: Vec<Sample>,
    pub total_len: f64,
    pub converged: bool,
    pub steps: u64,
}

const STOP_RADIUS: f64 = 1e-6;
const MAX_STEPS: u64 = 10_000_000;
const MAX_SAMPLES: usize = 16_384;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One fixed-step 4th-order Runge–Kutta integration of `(χ, L)`.
/// Returns `None` when the step size is visibly unstable (`f` increased or
/// went non-finite along the way).
pub(crate) fn integrate_flow<P: Problem + ?Sized>(
    problem: &P,
    x0: &[f64],
    r: f64,
    h: f64,
    max_steps: u64,
) -> Option<FlowTrace> {
    let d = x0.len();
    let mut chi = x0.to_vec();
    let mut len = 0.0f64;
    let mut f_prev = problem.value(&chi);
    if !f_prev.is_finite() {
        return None;
    }

    let mut samples: Vec<Sample> = Vec::new();
    let mut stride = 1u64;
    let mut g = vec![0.0; d];
    let push_sample =
        |samples: &mut Vec<Sample>, problem: &P, chi: &[f64], len: f64, g: &mut Vec<f64>| {
            let f = problem.value(chi);
            problem.gradient_into(chi, g);
            let gn = norm(g);
            samples.push(Sample {
                f,
                len,
                ratio: f.powf(-r) * gn,
            });
        };
    push_sample(&mut samples, problem, &chi, len, &mut g);

    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut stage = vec![0.0; d];
    let mut steps = 0u64;
    let mut converged = false;
    while steps < max_steps {
        problem.gradient_into(&chi, &mut k1);
        for i in 0..d {
            stage[i] = chi[i] - 0.5 * h * k1[i];
        }
        problem.gradient_into(&stage, &mut k2);
        for i in 0..d {
            stage[i] = chi[i] - 0.5 * h * k2[i];
        }
        problem.gradient_into(&stage, &mut k3);
        for i in 0..d {
            stage[i] = chi[i] - h * k3[i];
        }
        problem.gradient_into(&stage, &mut k4);
        for i in 0..d {
            chi[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        len += h / 6.0 * (norm(&k1) + 2.0 * norm(&k2) + 2.0 * norm(&k3) + norm(&k4));
        steps += 1;

        let f = problem.value(&chi);
        if !f.is_finite() || f > f_prev {
            return None; // unstable step size for this problem
        }
        f_prev = f;

        if steps.is_multiple_of(stride) {
            push_sample(&mut samples, problem, &chi, len, &mut g);
            if samples.len() >= MAX_SAMPLES {
                let mut kept = Vec::with_capacity(MAX_SAMPLES / 2);
                for (i, s) in samples.into_iter().enumerate() {
                    if i % 2 == 0 {
                        kept.push(s);
                    }
                }
                samples = kept;
                stride *= 2;
            }
        }
        if norm(&chi) <= STOP_RADIUS {
            converged = true;
            break;
        }
    }
    // Always retain the terminal state.
    push_sample(&mut samples, problem, &chi, len, &mut g);
    Some(FlowTrace {
        samples,
        total_len: len,
        converged,
        steps,
    })
}

/// Integrates with step halving until the accumulated arc length changes by
/// less than `ode_tol` (relative) between refinements.
fn converged_trace<P: Problem + ?Sized>(
    problem: &P,
    x0: &[f64],
    r: f64,
    ode_tol: f64,
) -> Option<FlowTrace> {
    let mut h = 0.2f64;
    let mut prev_len: Option<f64> = None;
    for _ in 0..40 {
        match integrate_flow(problem, x0, r, h, MAX_STEPS) {
            None => {}
            Some(trace) => {
                if !trace.converged {
                    return Some(trace);
                }
                if let Some(pl) = prev_len {
                    if (pl - trace.total_len).abs() <= ode_tol * trace.total_len.max(1.0) {
                        return Some(trace);
                    }
                }
                prev_len = Some(trace.total_len);
            }
        }
        h *= 0.5;
    }
    None
}

/// Integrates the descent flow from each start point and assembles the
/// growth certificate for the bound `f(x) ≥ {m(1−r)}^{1/(1−r)}|x|^{1/(1−r)}`.
pub fn verify_growth_by_flow<P: Problem + ?Sized>(
    problem: &P,
    r: f64,
    m: f64,
    start_points: &[Vec<f64>],
    ode_tol: f64,
) -> GrowthCertificate {
    assert!((0.0..=0.5).contains(&r), "exponent must lie in [0, 1/2]");
    assert!(m > 0.0 && ode_tol > 0.0);
    let exponent = 1.0 / (1.0 - r);
    let scale = (m * (1.0 - r)).powf(exponent);
    let mut points = Vec::with_capacity(start_points.len());
    let mut any_inconclusive = false;
    let mut any_refuted = false;

    for x0 in start_points {
        let f_start = problem.value(x0);
        let margin = f_start - scale * norm(x0).powf(exponent);
        if norm(x0) <= STOP_RADIUS {
            points.push(FlowPoint {
                start: x0.clone(),
                converged: true,
                steps: 0,
                length: 0.0,
                f_start,
                chain_lhs: desingularize(f_start, r),
                min_ratio: f64::INFINITY,
                chain_ok: true,
                margin,
            });
            continue;
        }
        let trace = converged_trace(problem, x0, r, ode_tol);
        let (converged, steps, total_len, chain_ok, min_ratio) = match &trace {
            None => (false, MAX_STEPS, f64::NAN, false, f64::NAN),
            Some(t) if !t.converged => (false, t.steps, t.total_len, false, f64::NAN),
            Some(t) => {
                // Suffix minima of the ratio validate the chain at every
                // retained sample: phibar(f_s) >= tailmin_s * (L_T - L_s),
                // with slack for the discretization and the dropped
                // phibar(f_T) >= 0 term.
                let mut ok = true;
                let mut tail_min = f64::INFINITY;
                let mut global_min = f64::INFINITY;
                for s in t.samples.iter().rev() {
                    tail_min = tail_min.min(s.ratio);
                    global_min = global_min.min(s.ratio);
                    let lhs = desingularize(s.f, r);
                    let rhs = tail_min * (t.total_len - s.len);
                    if lhs < rhs * (1.0 - 1e-3) - 1e-8 {
                        ok = false;
                    }
                }
                (true, t.steps, t.total_len, ok, global_min)
            }
        };
        if !converged {
            any_inconclusive = true;
        } else if margin < -ode_tol || !chain_ok {
            any_refuted = true;
        }
        points.push(FlowPoint {
            start: x0.clone(),
            converged,
            steps,
            length: total_len,
            f_start,
            chain_lhs: desingularize(f_start, r),
            min_ratio,
            chain_ok,
            margin,
        });
    }

    let outcome = if any_inconclusive {
        FlowOutcome::Inconclusive
    } else if any_refuted {
        FlowOutcome::Refuted
    } else {
        FlowOutcome::Certified
    };
    GrowthCertificate {
        checker: "growth-flow",
        r,
        m,
        ode_tolerance: ode_tol,
        points,
        outcome,
    }
}

//! Polynomial step schedules `γ_n = γ n^{-β}`, the rate exponent
//! `r_β = (β + 1/2) ∧ (2 - β)`, the shear coefficients `ε_{μ,n}`, and
//! deterministic verification of the sequence bounds the averaging analysis
//! rests on.
//!
//! Everything here is a pure function of its inputs; no randomness enters.

use serde::Serialize;
use thiserror::Error;

use crate::fit::{line_through, FitError};
use crate::kahan::KahanSum;

/// Largest index the increment-decay scan will touch. `u64` holds it with
/// room to spare, and `ε_{μ,n}` increments are still resolvable in `f64`
/// through the rearranged closed form (the naive difference dies around
/// `n ≈ 1e15`).
pub const INCREMENT_SCAN_CAP: u64 = 4_000_000_000_000_000_000;

/// Default density of geometric scan grids used by the lemma verifiers.
pub const DEFAULT_POINTS_PER_DECADE: u32 = 40;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("gamma must be positive, got {0}")]
    BadGamma(f64),
    #[error("beta must lie in (0,1), got {0}")]
    BadBeta(f64),
    #[error("beta must lie in (1/2,1) for the rate exponent, got {0}")]
    BetaOutsideRateRange(f64),
    #[error("epsilon coefficient is degenerate at index {n}: mu*gamma_n*n = 1")]
    DegenerateIndex { n: u64 },
    #[error(
        "scan window [{lo}, {hi}] must start past the sign-change index {start} \
         of 1 - mu*gamma_n*n"
    )]
    WindowCrossesDegenerate { lo: u64, hi: u64, start: u64 },
    #[error("scan window [{lo}, {hi}] is empty or reversed")]
    EmptyWindow { lo: u64, hi: u64 },
    #[error("iteration start n0={n0} violates mu*gamma_n0 < 1 (mu*gamma_n0 = {value})")]
    ContractionViolated { n0: u64, value: f64 },
    #[error("decay parameter r must be at least 1, got {0}")]
    BadR(f64),
    #[error("decay parameter q must be at least 2, got {0}")]
    BadQ(f64),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// The schedule `γ_n = γ n^{-β}` with `γ > 0` and `β ∈ (0,1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepSchedule {
    gamma: f64,
    beta: f64,
}

impl StepSchedule {
    pub fn new(gamma: f64, beta: f64) -> Result<Self, ScheduleError> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(ScheduleError::BadGamma(gamma));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(ScheduleError::BadBeta(beta));
        }
        Ok(Self { gamma, beta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `γ_n = γ n^{-β}`.
    ///
    /// # Panics
    /// `n = 0` is outside the schedule's domain.
    #[inline]
    pub fn step(&self, n: u64) -> f64 {
        assert!(n >= 1, "step index must be at least 1");
        self.gamma * (n as f64).powf(-self.beta)
    }

    /// All steps `γ_1 .. γ_n_max` as a table, `table[i] = γ_{i+1}`.
    ///
    /// The replication engine walks hundreds of millions of steps; a shared
    /// table avoids re-evaluating `powf` on every iteration of every
    /// replication.
    pub fn step_table(&self, n_max: u64) -> Vec<f64> {
        (1..=n_max).map(|n| self.step(n)).collect()
    }

    /// `Γ_n = Σ_{k=1}^n γ_k`, accumulated with compensation so that the
    /// million-term sums used by the sequence verifiers keep full precision.
    pub fn cumulative(&self, n: u64) -> f64 {
        let mut acc = KahanSum::new();
        for k in 1..=n {
            acc.add(self.step(k));
        }
        acc.value()
    }
}

/// The second-order error exponent `r_β = (β + 1/2) ∧ (2 - β)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateExponent {
    pub beta: f64,
    pub r_beta: f64,
}

/// Computes `r_β` for `β ∈ (1/2, 1)`; the exponent is maximal at `β = 3/4`
/// where it equals `5/4`.
pub fn rate_exponent(beta: f64) -> Result<RateExponent, ScheduleError> {
    if !(beta > 0.5 && beta < 1.0) {
        return Err(ScheduleError::BetaOutsideRateRange(beta));
    }
    Ok(RateExponent {
        beta,
        r_beta: (beta + 0.5).min(2.0 - beta),
    })
}

/// `ε_{μ,m} = (1 - μ γ_m) / (1 - μ γ_m m)` evaluated at index `m` itself.
///
/// Degenerate when the denominator vanishes exactly (the evolution block is
/// then not diagonalizable); reported as a typed error so scans can skip it.
pub fn epsilon_at(sched: &StepSchedule, mu: f64, m: u64) -> Result<f64, ScheduleError> {
    let g = sched.step(m);
    let denom = 1.0 - mu * g * m as f64;
    if denom == 0.0 {
        return Err(ScheduleError::DegenerateIndex { n: m });
    }
    Ok((1.0 - mu * g) / denom)
}

/// The shear coefficient attached to step `n -> n+1`, i.e.
/// `ε_{μ,n+1} = (1 - μ γ_{n+1}) / (1 - μ γ_{n+1} (n+1))`.
pub fn epsilon_mu(sched: &StepSchedule, mu: f64, n: u64) -> Result<f64, ScheduleError> {
    epsilon_at(sched, mu, n + 1)
}

/// Smallest index `n` with `μ γ_n n > 1`.
///
/// Since `γ_n n = γ n^{1-β}` is strictly increasing, the denominator
/// `1 - μ γ_n n` is negative for every index from this point on: scans of
/// `ε_{μ,n}` start here to stay clear of the sign change and the degenerate
/// index.
pub fn epsilon_scan_start(sched: &StepSchedule, mu: f64) -> u64 {
    assert!(mu > 0.0, "mu must be positive");
    // Closed-form candidate n = (1/(mu*gamma))^{1/(1-beta)}, then a short
    // exact scan upward from a safe underestimate to absorb powf rounding.
    let expo = 1.0 / (1.0 - sched.beta);
    let cand = (1.0 / (mu * sched.gamma)).powf(expo);
    if !cand.is_finite() || cand >= INCREMENT_SCAN_CAP as f64 {
        // Threshold beyond any admissible scan window; saturate so that
        // window validation rejects everything in range.
        return u64::MAX;
    }
    let mut n = if cand >= 1.0 {
        ((cand * (1.0 - 1e-12)) as u64).saturating_sub(2).max(1)
    } else {
        1
    };
    while mu * sched.step(n) * n as f64 <= 1.0 {
        n += 1;
    }
    n
}

pub(crate) fn geometric_index_grid(lo: u64, hi: u64, points_per_decade: u32) -> Vec<u64> {
    debug_assert!(lo >= 1 && hi >= lo);
    let ppd = points_per_decade as f64;
    let k0 = (ppd * (lo as f64).log10()).ceil() as i64;
    let k1 = (ppd * (hi as f64).log10()).floor() as i64;
    let mut grid: Vec<u64> = Vec::new();
    for k in k0..=k1 {
        let n = (10f64.powf(k as f64 / ppd)).round().max(1.0) as u64;
        if grid.last() != Some(&n) {
            grid.push(n);
        }
    }
    if grid.first() != Some(&lo) {
        grid.insert(0, lo);
    }
    if grid.last() != Some(&hi) {
        grid.push(hi);
    }
    grid
}

/// `ε_{μ,n} - ε_{μ,n+1}` through an exact rearrangement that stays accurate
/// far beyond the point where the naive difference cancels to noise.
///
/// With `L = log(1 + 1/n)` and `γ_{n+1} = γ_n e^{-βL}`, the difference of the
/// two rational expressions reduces to
///
/// ```text
/// d_n = μ [ γ_n expm1(-βL) - n γ_n expm1((1-β)L) + μ γ_n γ_{n+1} ]
///       / [ (1 - μ γ_n n)(1 - μ γ_{n+1}(n+1)) ]
/// ```
///
/// whose numerator terms are each evaluated without cancellation.
pub fn epsilon_increment(sched: &StepSchedule, mu: f64, n: u64) -> Result<f64, ScheduleError> {
    let nf = n as f64;
    let gn = sched.step(n);
    let gn1 = sched.step(n + 1);
    let denom = (1.0 - mu * gn * nf) * (1.0 - mu * gn1 * (nf + 1.0));
    if denom == 0.0 {
        return Err(ScheduleError::DegenerateIndex { n });
    }
    let l = (1.0 / nf).ln_1p();
    let numerator = mu
        * (gn * (-sched.beta * l).exp_m1() - nf * gn * ((1.0 - sched.beta) * l).exp_m1()
            + mu * gn * gn1);
    Ok(numerator / denom)
}

/// Least-squares slope of `log |ε_{μ,n} - ε_{μ,n+1}|` against `log n` over a
/// geometric grid in `[n_lo, n_hi]`.
///
/// The window must lie entirely past [`epsilon_scan_start`] so that the
/// denominator keeps one sign; windows touching the sign change are
/// rejected. Two-point windows degenerate to the exact secant slope.
pub fn verify_eps_increment_decay(
    sched: &StepSchedule,
    mu: f64,
    n_lo: u64,
    n_hi: u64,
    points_per_decade: u32,
) -> Result<f64, ScheduleError> {
    if n_hi <= n_lo {
        return Err(ScheduleError::EmptyWindow { lo: n_lo, hi: n_hi });
    }
    let start = epsilon_scan_start(sched, mu);
    if n_lo < start {
        return Err(ScheduleError::WindowCrossesDegenerate {
            lo: n_lo,
            hi: n_hi,
            start,
        });
    }
    let grid = geometric_index_grid(n_lo, n_hi, points_per_decade);
    let mut points = Vec::with_capacity(grid.len());
    for &n in &grid {
        let d = epsilon_increment(sched, mu, n)?.abs();
        if d > 0.0 {
            points.push(((n as f64).ln(), d.ln()));
        }
    }
    Ok(line_through(&points)?.slope)
}

/// The scan window in which the increment decay exhibits its asymptotic
/// exponent `β - 2` to within ±0.02.
///
/// Two effects bias short windows: the denominator needs `μ γ_n n ≫ 1`
/// (start at `(25/(μγ))^{1/(1-β)}`), and the numerator's `μ γ_n γ_{n+1}`
/// correction needs `n^β ≫ 100 μγ` (start at `(100 μγ)^{1/β}`). The window
/// spans two decades from the larger of the two, capped at
/// [`INCREMENT_SCAN_CAP`].
pub fn default_increment_window(sched: &StepSchedule, mu: f64) -> (u64, u64) {
    let mg = mu * sched.gamma;
    let n_a = (25.0 / mg).powf(1.0 / (1.0 - sched.beta));
    let n_b = (100.0 * mg).powf(1.0 / sched.beta);
    let mut lo = 10u64;
    for cand in [n_a, n_b] {
        if cand.is_finite() && cand > lo as f64 {
            lo = cand.ceil() as u64;
        }
    }
    let lo = lo.min(INCREMENT_SCAN_CAP / 100);
    let hi = lo.saturating_mul(100).min(INCREMENT_SCAN_CAP);
    (lo, hi)
}

/// Output of [`iterate_lemma_a3`].
#[derive(Clone, Debug, Serialize)]
pub struct ContractionAverageReport {
    /// `sup_n n·u_n` over the scanned range.
    pub sup_n_u: f64,
    /// Index attaining the supremum.
    pub sup_at: u64,
    /// `n_max · u_{n_max}`.
    pub terminal_n_u: f64,
    /// Minimum of `n·u_n` over the last decade of the scan — an empirical
    /// stand-in for the liminf, reported but never asserted positive.
    pub min_n_u_last_decade: f64,
    /// `(n, u_n)` on a 10-points-per-decade geometric grid.
    pub checkpoints: Vec<(u64, f64)>,
}

/// Iterates `u_{n+1} = (1 - γ_{n+1} μ) (n/(n+1)) u_n + β_{n+1}` from
/// `u_{n0}` and reports the observed `O(1/n)` behaviour.
///
/// Requires `μ γ_{n0} < 1` so every factor stays in `(0,1)`; the forcing
/// sequence is supplied as an oracle `β_{n+1} = beta_seq(n+1)`.
pub fn iterate_lemma_a3(
    sched: &StepSchedule,
    mu: f64,
    mut beta_seq: impl FnMut(u64) -> f64,
    u_n0: f64,
    n0: u64,
    n_max: u64,
) -> Result<ContractionAverageReport, ScheduleError> {
    let mg = mu * sched.step(n0);
    if mg >= 1.0 || mg.is_nan() {
        return Err(ScheduleError::ContractionViolated { n0, value: mg });
    }
    let grid = geometric_index_grid(n0, n_max, 10);
    let mut next_cp = 0usize;
    let mut checkpoints = Vec::with_capacity(grid.len());
    let last_decade_from = (n_max / 10).max(n0);

    let mut u = u_n0;
    let mut sup = n0 as f64 * u;
    let mut sup_at = n0;
    let mut min_tail = f64::INFINITY;
    for n in n0..=n_max {
        let nu = n as f64 * u;
        if nu > sup {
            sup = nu;
            sup_at = n;
        }
        if n >= last_decade_from && nu < min_tail {
            min_tail = nu;
        }
        while next_cp < grid.len() && grid[next_cp] == n {
            checkpoints.push((n, u));
            next_cp += 1;
        }
        if n == n_max {
            break;
        }
        let gn1 = sched.step(n + 1);
        u = (1.0 - gn1 * mu) * (n as f64 / (n + 1) as f64) * u + beta_seq(n + 1);
    }
    Ok(ContractionAverageReport {
        sup_n_u: sup,
        sup_at,
        terminal_n_u: n_max as f64 * u,
        min_n_u_last_decade: min_tail,
        checkpoints,
    })
}

/// Output of [`verify_lemma_a4`].
#[derive(Clone, Debug, Serialize)]
pub struct PerturbedContractionReport {
    /// `C* = max_n (u_n - V/n) n^{r ∧ (q-1)}` over the scan.
    pub c_star: f64,
    /// Index attaining `C*`.
    pub attained_at: u64,
    /// The same maximum restricted to `n ≤ n_max/10`; equality with `c_star`
    /// certifies that the constant has stabilised.
    pub c_star_at_tenth: f64,
    /// Exponent `r ∧ (q-1)` used for the normalization.
    pub exponent: f64,
    /// Smallest index after which `(u_n - V/n) n^{r ∧ (q-1)}` never
    /// increases again, if the tail is non-increasing.
    pub nonincreasing_from: Option<u64>,
    /// Terminal `u_{n_max}`.
    pub terminal_u: f64,
}

/// Iterates `u_{n+1} = u_n (1 - 1/(n+1))^2 (1 + 2 n^{-r}) + V/(n+1)^2 +
/// c̄ n^{-q}` from `u_1 = V + c̄` and scans for the smallest admissible
/// constant in the bound `u_n ≤ V/n + C n^{-(r ∧ (q-1))}`.
///
/// `r = ∞` is accepted and drops the `2 n^{-r}` perturbation entirely
/// (the exact telescoping case). Requires `r ≥ 1` and `q ≥ 2`.
pub fn verify_lemma_a4(
    v: f64,
    cbar: f64,
    r: f64,
    q: f64,
    n_max: u64,
) -> Result<PerturbedContractionReport, ScheduleError> {
    if r < 1.0 || r.is_nan() {
        return Err(ScheduleError::BadR(r));
    }
    if q < 2.0 || q.is_nan() {
        return Err(ScheduleError::BadQ(q));
    }
    let exponent = if r.is_infinite() { q - 1.0 } else { r.min(q - 1.0) };
    let mut u = v + cbar;
    let mut c_star = f64::NEG_INFINITY;
    let mut attained_at = 1u64;
    let mut c_star_tenth = f64::NEG_INFINITY;
    let tenth = (n_max / 10).max(1);
    let mut prev_c = f64::NEG_INFINITY;
    let mut last_increase = 1u64;
    for n in 1..=n_max {
        let nf = n as f64;
        let c_n = (u - v / nf) * nf.powf(exponent);
        if c_n > c_star {
            c_star = c_n;
            attained_at = n;
        }
        if n <= tenth && c_n > c_star_tenth {
            c_star_tenth = c_n;
        }
        if c_n > prev_c && n > 1 {
            last_increase = n;
        }
        prev_c = c_n;
        if n == n_max {
            break;
        }
        let shrink = 1.0 - 1.0 / (nf + 1.0);
        let perturb = if r.is_infinite() {
            1.0
        } else {
            1.0 + 2.0 * nf.powf(-r)
        };
        u = u * shrink * shrink * perturb + v / ((nf + 1.0) * (nf + 1.0)) + cbar * nf.powf(-q);
    }
    let nonincreasing_from = if last_increase < n_max {
        Some(last_increase)
    } else {
        None
    };
    Ok(PerturbedContractionReport {
        c_star,
        attained_at,
        c_star_at_tenth: c_star_tenth,
        exponent,
        nonincreasing_from,
        terminal_u: u,
    })
}

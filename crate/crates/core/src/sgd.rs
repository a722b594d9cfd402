//! The stochastic-gradient recursion `θ_{n+1} = θ_n − γ_{n+1} Λ(θ_n, Z_{n+1})`
//! with online (Cesàro) averaging `θ̂_n = (1/n) Σ_{k≤n} θ_k`, trajectory
//! checkpointing, and the moment-consistency diagnostic
//! `E|θ_n|^p / γ_n^{p/2}`.
//!
//! Everything here runs in the centered coordinates of [`crate::problems`]
//! (the minimizer is the origin), so error norms are plain norms.

use std::io::{self, Write};

use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::kahan::kahan_add;
use crate::problems::Problem;
use crate::schedule::StepSchedule;

/// Iterates whose norm exceeds this are treated as diverged: far beyond any
/// stable trajectory of the benchmarks, yet far below overflow.
pub const DIVERGENCE_LIMIT: f64 = 1e15;

#[derive(Clone, Copy, Debug, Error, PartialEq)]
#[error("iterate diverged at step {step} (coordinate magnitude {magnitude:.3e})")]
pub struct DivergenceError {
    pub step: u64,
    pub magnitude: f64,
}

/// The pure online-mean update `θ̂ + (θ − θ̂)/k` where `θ` is the `k`-th
/// absorbed iterate.
pub fn average_update(theta_bar: &[f64], theta: &[f64], k: u64) -> Vec<f64> {
    debug_assert!(k >= 1);
    theta_bar
        .iter()
        .zip(theta)
        .map(|(b, t)| b + (t - b) / k as f64)
        .collect()
}

/// Mutable state of one run: the iterate, its running average (compensated
/// per coordinate), and the step counter.
#[derive(Clone, Debug)]
pub struct RunState {
    schedule: StepSchedule,
    n: u64,
    theta: Vec<f64>,
    theta_bar: Vec<f64>,
    bar_comp: Vec<f64>,
    scratch: Vec<f64>,
    burn_in: u64,
    averaged: u64,
}

impl RunState {
    /// Starts at `θ_0 = theta0` with no iterates averaged yet. Averaging
    /// absorbs `θ_{burn_in+1}, θ_{burn_in+2}, …`; the default estimator
    /// (`burn_in = 0`) is the plain mean of `θ_1..θ_n`.
    pub fn new(schedule: StepSchedule, theta0: &[f64], burn_in: u64) -> Self {
        let d = theta0.len();
        Self {
            schedule,
            n: 0,
            theta: theta0.to_vec(),
            theta_bar: vec![0.0; d],
            bar_comp: vec![0.0; d],
            scratch: vec![0.0; d],
            burn_in,
            averaged: 0,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// The running average; all-zero until the first iterate past the
    /// burn-in is absorbed.
    pub fn theta_bar(&self) -> &[f64] {
        &self.theta_bar
    }

    /// One gradient step with an explicit step size (the run loop feeds a
    /// precomputed table, avoiding a `powf` per iteration).
    #[inline]
    pub fn raw_step<P: Problem + ?Sized>(
        &mut self,
        gamma: f64,
        problem: &P,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), DivergenceError> {
        problem.sample_gradient_into(&self.theta, &mut self.scratch, rng);
        self.n += 1;
        let mut max_abs = 0.0f64;
        for (t, g) in self.theta.iter_mut().zip(&self.scratch) {
            *t -= gamma * g;
            max_abs = max_abs.max(t.abs());
        }
        if max_abs > DIVERGENCE_LIMIT || max_abs.is_nan() {
            return Err(DivergenceError {
                step: self.n,
                magnitude: max_abs,
            });
        }
        Ok(())
    }

    /// The gradient recursion alone: `θ_{n+1} = θ_n − γ_{n+1} Λ(θ_n, ·)`,
    /// with the step size taken from the schedule.
    pub fn rm_step<P: Problem + ?Sized>(
        &mut self,
        problem: &P,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), DivergenceError> {
        let gamma = self.schedule.step(self.n + 1);
        self.raw_step(gamma, problem, rng)
    }

    /// Absorbs the current iterate into the running average (no-op inside
    /// the burn-in window).
    #[inline]
    pub fn absorb_average(&mut self) {
        if self.n <= self.burn_in {
            return;
        }
        self.averaged += 1;
        let k = self.averaged as f64;
        for i in 0..self.theta.len() {
            let delta = (self.theta[i] - self.theta_bar[i]) / k;
            kahan_add(&mut self.theta_bar[i], &mut self.bar_comp[i], delta);
        }
    }

    /// One full iteration: gradient step, then averaging.
    pub fn step<P: Problem + ?Sized>(
        &mut self,
        problem: &P,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), DivergenceError> {
        self.rm_step(problem, rng)?;
        self.absorb_average();
        Ok(())
    }
}

/// Snapshots of `(θ_n, θ̂_n)` at a strictly increasing set of checkpoint
/// indices, in centered coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub dim: usize,
    pub checkpoints: Vec<u64>,
    pub theta: Vec<Vec<f64>>,
    pub theta_bar: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    /// CSV with columns `n, theta[0..d), theta_bar[0..d)`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write!(w, "n")?;
        for i in 0..self.dim {
            write!(w, ",theta{i}")?;
        }
        for i in 0..self.dim {
            write!(w, ",theta_bar{i}")?;
        }
        writeln!(w)?;
        for (j, &n) in self.checkpoints.iter().enumerate() {
            write!(w, "{n}")?;
            for v in &self.theta[j] {
                write!(w, ",{v}")?;
            }
            for v in &self.theta_bar[j] {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Runs the recursion for `steps.len()` iterations using the precomputed
/// step-size table `steps[k] = γ_{k+1}`, recording snapshots at the given
/// checkpoint indices (strictly increasing, within `[1, steps.len()]`).
///
/// Deterministic: the record is a pure function of `(problem, steps, theta0,
/// burn_in, checkpoints, generator state)`.
pub fn run_with_steps<P: Problem + ?Sized>(
    problem: &P,
    schedule: StepSchedule,
    steps: &[f64],
    theta0: &[f64],
    checkpoints: &[u64],
    burn_in: u64,
    rng: &mut ChaCha8Rng,
) -> Result<TrajectoryRecord, DivergenceError> {
    let n_max = steps.len() as u64;
    assert!(n_max >= 1, "need at least one step");
    assert!(
        checkpoints.windows(2).all(|w| w[0] < w[1]),
        "checkpoints must be strictly increasing"
    );
    if let (Some(&first), Some(&last)) = (checkpoints.first(), checkpoints.last()) {
        assert!(first >= 1 && last <= n_max, "checkpoints outside [1, n_max]");
    }

    let mut state = RunState::new(schedule, theta0, burn_in);
    let mut record = TrajectoryRecord {
        dim: theta0.len(),
        checkpoints: checkpoints.to_vec(),
        theta: Vec::with_capacity(checkpoints.len()),
        theta_bar: Vec::with_capacity(checkpoints.len()),
    };
    let mut next_cp = 0usize;
    for (k, &gamma) in steps.iter().enumerate() {
        state.raw_step(gamma, problem, rng)?;
        state.absorb_average();
        if next_cp < checkpoints.len() && checkpoints[next_cp] == (k + 1) as u64 {
            record.theta.push(state.theta.clone());
            record.theta_bar.push(state.theta_bar.clone());
            next_cp += 1;
        }
    }
    Ok(record)
}

/// [`run_with_steps`] with the table built from the schedule.
pub fn run<P: Problem + ?Sized>(
    problem: &P,
    schedule: StepSchedule,
    theta0: &[f64],
    n_max: u64,
    checkpoints: &[u64],
    burn_in: u64,
    rng: &mut ChaCha8Rng,
) -> Result<TrajectoryRecord, DivergenceError> {
    let steps = schedule.step_table(n_max);
    run_with_steps(problem, schedule, &steps, theta0, checkpoints, burn_in, rng)
}

/// Which iterate sequence an estimator or diagnostic reads.
#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// The last iterate `θ_n`.
    Raw,
    /// The running average `θ̂_n`.
    Averaged,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConsistencyError {
    #[error("moment order must be 2 or 4, got {0}")]
    BadMomentOrder(u32),
    #[error("records disagree on checkpoints or dimension")]
    MismatchedRecords,
    #[error("no records supplied")]
    Empty,
}

/// The curve `n ↦ (1/R) Σ_r |θ_n^{(r)}|^p / γ_n^{p/2}` across replications.
///
/// A bounded, non-exploding maximum supports `(L^p, √γ_n)`-consistency of
/// the raw iterate; the zero-noise limit drives the curve to zero.
#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyCurve {
    pub p: u32,
    pub checkpoints: Vec<u64>,
    pub ratio: Vec<f64>,
    pub max_ratio: f64,
    /// Fewer than 100 replications: estimates carry wide uncertainty.
    pub low_replication_warning: bool,
}

/// Computes the consistency curve for the chosen estimator from replicated
/// trajectory records (all sharing one checkpoint grid).
pub fn empirical_consistency(
    records: &[TrajectoryRecord],
    estimator: Estimator,
    p: u32,
    schedule: &StepSchedule,
) -> Result<ConsistencyCurve, ConsistencyError> {
    if !(p == 2 || p == 4) {
        return Err(ConsistencyError::BadMomentOrder(p));
    }
    let first = records.first().ok_or(ConsistencyError::Empty)?;
    if records
        .iter()
        .any(|r| r.checkpoints != first.checkpoints || r.dim != first.dim)
    {
        return Err(ConsistencyError::MismatchedRecords);
    }
    let r_count = records.len() as f64;
    let mut ratio = Vec::with_capacity(first.checkpoints.len());
    let mut max_ratio = 0.0f64;
    for (j, &n) in first.checkpoints.iter().enumerate() {
        let mut mean = crate::kahan::KahanSum::new();
        for rec in records {
            let snap = match estimator {
                Estimator::Raw => &rec.theta[j],
                Estimator::Averaged => &rec.theta_bar[j],
            };
            let norm_sq: f64 = snap.iter().map(|v| v * v).sum();
            mean.add(match p {
                2 => norm_sq,
                _ => norm_sq * norm_sq,
            });
        }
        let gamma_n = schedule.step(n);
        let denom = gamma_n.powi(p as i32 / 2);
        let value = mean.value() / r_count / denom;
        max_ratio = max_ratio.max(value);
        ratio.push(value);
    }
    Ok(ConsistencyCurve {
        p,
        checkpoints: first.checkpoints.clone(),
        ratio,
        max_ratio,
        low_replication_warning: records.len() < 100,
    })
}

//! Replicated-experiment engine: MSE curves with uncertainty, first-order
//! checks against `Tr(Σ*)`, and the second-order rate probe.
//!
//! Replications are independent tasks seeded by the documented mix in
//! [`crate::rng`]; results are merged in replication-index order with
//! compensated summation, so the output is a pure function of the
//! configuration regardless of worker count or completion order.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fit::{fit_rate, FitError, RateFit};
use crate::kahan::KahanSum;
use crate::problems::Problem;
use crate::rng::replication_rng;
use crate::schedule::{geometric_index_grid, StepSchedule};
use crate::sgd::{run_with_steps, Estimator};
use crate::spectral::SpectralData;

/// Which estimator curves an experiment produces.
#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorSelection {
    Raw,
    Averaged,
    Both,
}

impl EstimatorSelection {
    pub fn selected(self) -> &'static [Estimator] {
        match self {
            EstimatorSelection::Raw => &[Estimator::Raw],
            EstimatorSelection::Averaged => &[Estimator::Averaged],
            EstimatorSelection::Both => &[Estimator::Raw, Estimator::Averaged],
        }
    }
}

/// Run parameters of one replicated experiment.
///
/// `theta0` is the start expressed as a displacement from the minimizer
/// (the problems work in coordinates centered there). Checkpoints form a
/// geometric grid with `points_per_decade` points per decade ending at
/// `n_max`.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub schedule: StepSchedule,
    pub theta0: Vec<f64>,
    pub n_max: u64,
    pub replications: usize,
    pub master_seed: u64,
    pub points_per_decade: u32,
    pub estimator: EstimatorSelection,
}

impl ExperimentConfig {
    /// The checkpoint grid: geometric from `min(10, n_max)` to `n_max`.
    pub fn checkpoints(&self) -> Vec<u64> {
        geometric_index_grid(10.min(self.n_max), self.n_max, self.points_per_decade)
    }
}

/// One estimator's Monte Carlo MSE curve.
#[derive(Clone, Debug, Serialize)]
pub struct MseCurve {
    pub estimator: Estimator,
    pub checkpoints: Vec<u64>,
    /// `mse(n_j) = (1/R)Σ_r |est_r(n_j) − θ*|²` over completed replications.
    pub mse: Vec<f64>,
    /// Standard error of the mean of the per-replication squared errors.
    pub se: Vec<f64>,
    pub n_times_mse: Vec<f64>,
    /// Completed (non-diverged) replications behind every point.
    pub replications_used: usize,
}

/// All curves of one experiment plus the divergence census.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub curves: Vec<MseCurve>,
    pub diverged: usize,
    pub replications: usize,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("{diverged} of {replications} replications diverged (budget is 1%)")]
    TooManyDivergences { diverged: usize, replications: usize },
}

struct RepOutcome {
    raw_sq: Vec<f64>,
    avg_sq: Vec<f64>,
}

/// Runs `R` independent replications and aggregates their squared errors.
///
/// Deterministic for a fixed config: replication `r` draws from the stream
/// keyed by `(master_seed, r)`, results merge in index order. Diverged
/// replications are excluded and counted; more than 1% of them fails the
/// experiment.
pub fn run_experiment<P: Problem + ?Sized>(
    problem: &P,
    config: &ExperimentConfig,
) -> Result<ExperimentOutput, ExperimentError> {
    assert!(config.replications >= 1, "need at least one replication");
    assert!(config.n_max >= 1, "need at least one step");
    assert!(config.points_per_decade >= 1, "need a nonempty grid");
    assert_eq!(config.theta0.len(), problem.dim(), "start has wrong dimension");

    let checkpoints = config.checkpoints();
    let steps = config.schedule.step_table(config.n_max);
    let want_raw = config.estimator != EstimatorSelection::Averaged;
    let want_avg = config.estimator != EstimatorSelection::Raw;

    let outcomes: Vec<Option<RepOutcome>> = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(config.master_seed, rep);
            let record = run_with_steps(
                problem,
                config.schedule,
                &steps,
                &config.theta0,
                &checkpoints,
                0,
                &mut rng,
            )
            .ok()?;
            let sq = |points: &[Vec<f64>]| -> Vec<f64> {
                points
                    .iter()
                    .map(|p| p.iter().map(|v| v * v).sum())
                    .collect()
            };
            Some(RepOutcome {
                raw_sq: if want_raw { sq(&record.theta) } else { Vec::new() },
                avg_sq: if want_avg { sq(&record.theta_bar) } else { Vec::new() },
            })
        })
        .collect();

    let diverged = outcomes.iter().filter(|o| o.is_none()).count();
    if diverged * 100 > config.replications {
        return Err(ExperimentError::TooManyDivergences {
            diverged,
            replications: config.replications,
        });
    }
    let used = config.replications - diverged;

    let mut curves = Vec::new();
    for &estimator in config.estimator.selected() {
        let mut sum = vec![KahanSum::new(); checkpoints.len()];
        let mut sum_sq = vec![KahanSum::new(); checkpoints.len()];
        for outcome in outcomes.iter().flatten() {
            let sq = match estimator {
                Estimator::Raw => &outcome.raw_sq,
                Estimator::Averaged => &outcome.avg_sq,
            };
            for (j, &x) in sq.iter().enumerate() {
                sum[j].add(x);
                sum_sq[j].add(x * x);
            }
        }
        let r = used as f64;
        let mut mse = Vec::with_capacity(checkpoints.len());
        let mut se = Vec::with_capacity(checkpoints.len());
        let mut n_times_mse = Vec::with_capacity(checkpoints.len());
        for (j, &n) in checkpoints.iter().enumerate() {
            let mean = sum[j].value() / r;
            let var = (sum_sq[j].value() / r - mean * mean).max(0.0);
            mse.push(mean);
            se.push((var / r).sqrt());
            n_times_mse.push(n as f64 * mean);
        }
        curves.push(MseCurve {
            estimator,
            checkpoints: checkpoints.clone(),
            mse,
            se,
            n_times_mse,
            replications_used: used,
        });
    }
    Ok(ExperimentOutput {
        curves,
        diverged,
        replications: config.replications,
    })
}

/// Writes curves as CSV rows `n, mse, se, n_times_mse, estimator`.
pub fn write_mse_csv<W: Write>(curves: &[MseCurve], w: &mut W) -> io::Result<()> {
    writeln!(w, "n,mse,se,n_times_mse,estimator")?;
    for curve in curves {
        let label = match curve.estimator {
            Estimator::Raw => "raw",
            Estimator::Averaged => "averaged",
        };
        for (j, &n) in curve.checkpoints.iter().enumerate() {
            writeln!(
                w,
                "{n},{},{},{},{label}",
                curve.mse[j], curve.se[j], curve.n_times_mse[j]
            )?;
        }
    }
    Ok(())
}

/// The normalized first-order curve `n·mse(n)/Tr(Σ*)` over a window.
#[derive(Clone, Debug, Serialize)]
pub struct FirstOrderCheck {
    pub window: (u64, u64),
    pub checkpoints: Vec<u64>,
    pub ratio: Vec<f64>,
    pub terminal_ratio: f64,
    /// `terminal_ratio ± 2·SE`, the Monte Carlo confidence band.
    pub terminal_band: (f64, f64),
}

/// Normalizes the curve by the asymptotic variance trace over `window`.
pub fn first_order_check(
    curve: &MseCurve,
    spectral: &SpectralData,
    window: (u64, u64),
) -> FirstOrderCheck {
    assert!(window.0 <= window.1, "window must be ordered");
    let trace = spectral.trace_sigma;
    assert!(trace > 0.0);
    let mut checkpoints = Vec::new();
    let mut ratio = Vec::new();
    let mut band = (f64::NAN, f64::NAN);
    for (j, &n) in curve.checkpoints.iter().enumerate() {
        if n < window.0 || n > window.1 {
            continue;
        }
        checkpoints.push(n);
        let r = curve.n_times_mse[j] / trace;
        ratio.push(r);
        let half = 2.0 * n as f64 * curve.se[j] / trace;
        band = (r - half, r + half);
    }
    assert!(!checkpoints.is_empty(), "window contains no checkpoints");
    FirstOrderCheck {
        window,
        checkpoints,
        terminal_ratio: *ratio.last().unwrap(),
        terminal_band: band,
        ratio,
    }
}

/// Verdict of the second-order probe.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeOutcome {
    Fitted { fit: RateFit },
    /// Residual dominated by Monte Carlo noise on too much of the window.
    Inconclusive,
}

/// Rate fit on the residual `|mse(n) − Tr(Σ*)/n|` after noise trimming.
#[derive(Clone, Debug, Serialize)]
pub struct SecondOrderProbe {
    /// Checkpoints that survived the noise-floor trim.
    pub kept: Vec<u64>,
    pub residual: Vec<f64>,
    /// Median standard error of the curve: the Monte Carlo noise scale.
    pub noise_floor: f64,
    pub outcome: ProbeOutcome,
}

/// Probes the second-order term by fitting `log|mse − Tr(Σ*)/n|` against
/// `log n`. Checkpoints where the residual's standard error exceeds 30% of
/// the residual are trimmed; fewer than 3 survivors make the probe
/// inconclusive rather than a fit of pure noise.
pub fn second_order_probe(curve: &MseCurve, spectral: &SpectralData) -> SecondOrderProbe {
    let trace = spectral.trace_sigma;
    let mut kept = Vec::new();
    let mut residual = Vec::new();
    for (j, &n) in curve.checkpoints.iter().enumerate() {
        let r = (curve.mse[j] - trace / n as f64).abs();
        if r > 0.0 && curve.se[j] <= 0.3 * r {
            kept.push(n);
            residual.push(r);
        }
    }
    let mut ses = curve.se.clone();
    ses.sort_by(f64::total_cmp);
    let noise_floor = if ses.is_empty() {
        0.0
    } else {
        ses[ses.len() / 2]
    };
    let outcome = if kept.len() < 3 {
        ProbeOutcome::Inconclusive
    } else {
        let points: Vec<(f64, f64)> = kept
            .iter()
            .zip(&residual)
            .map(|(&n, &r)| (n as f64, r))
            .collect();
        match fit_rate(&points) {
            Ok(fit) => ProbeOutcome::Fitted { fit },
            Err(FitError::TooFewPoints(_)) => ProbeOutcome::Inconclusive,
            Err(e) => unreachable!("positive residuals cannot fail the fit: {e}"),
        }
    };
    SecondOrderProbe {
        kept,
        residual,
        noise_floor,
        outcome,
    }
}

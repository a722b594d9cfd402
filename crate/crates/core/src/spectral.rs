//! Spectral structure at the minimizer and the coupled two-block view of
//! the averaged recursion.
//!
//! `compute_sigma_star` packages the curvature `Λ* = D²f(θ*)`, its
//! eigendecomposition `Λ* = QᵀD*Q`, the noise covariance `S* = S(θ*)`, and
//! the asymptotic covariance `Σ* = Λ*⁻¹ S* Λ*⁻¹` whose trace is the target
//! of the `n·MSE` experiments.
//!
//! The remaining items replay the recursion in stacked coordinates
//! `Z_n = (θ_n, θ̂_n)`: the per-mode evolution blocks `E_{μ,n}`, their
//! `2d×2d` assembly with the shear factorization, the step-by-step replay
//! that verifies the linearized form against the direct recursion, and the
//! cross-moment diagnostics `ω_n(i)` computed past the index where the
//! shear coefficients stabilize.
//!
//! Everything operates in the centered coordinates of [`crate::problems`].

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{DMatrix, Matrix2};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::kahan::{kahan_add, KahanSum};
use crate::problems::Problem;
use crate::rng::replication_rng;
use crate::schedule::{
    epsilon_at, epsilon_mu, epsilon_scan_start, geometric_index_grid, StepSchedule,
};
use crate::sgd::{run_with_steps, DivergenceError};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("curvature matrix is not positive definite: eigenvalue {eigenvalue}")]
    NonPdHessian { eigenvalue: f64 },
    #[error("evolution block for mode {mode} is not diagonalizable at step {n}")]
    DegenerateShear { mode: usize, n: u64 },
}

/// Curvature and covariance structure at the minimizer.
///
/// Invariants (validated in tests at `10⁻¹⁰`): `Q` orthonormal,
/// `Λ* = QᵀD*Q`, and `Σ* = Λ*⁻¹S*Λ*⁻¹` symmetric PSD.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub lambda_star: DMatrix<f64>,
    /// Rows are eigenvectors: `QΛ* = D*Q`.
    pub q: DMatrix<f64>,
    /// Eigenvalues of `Λ*`, ascending.
    pub d_star: Vec<f64>,
    pub s_star: DMatrix<f64>,
    pub sigma_star: DMatrix<f64>,
    pub trace_sigma: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.d_star.len()
    }

    /// `‖QᵀQ − I‖_F`.
    pub fn orthonormality_residual(&self) -> f64 {
        let d = self.dim();
        (self.q.transpose() * &self.q - DMatrix::identity(d, d)).norm()
    }

    /// `‖QᵀD*Q − Λ*‖_F / ‖Λ*‖_F`.
    pub fn reconstruction_residual(&self) -> f64 {
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&self.d_star));
        (self.q.transpose() * diag * &self.q - &self.lambda_star).norm() / self.lambda_star.norm()
    }
}

/// Eigendecomposition of the curvature at the (centered) minimizer plus the
/// induced asymptotic covariance.
pub fn compute_sigma_star<P: Problem + ?Sized>(problem: &P) -> Result<SpectralData, SpectralError> {
    let d = problem.dim();
    let origin = vec![0.0; d];
    let lambda_star = problem.hessian(&origin);
    let s_star = problem.noise_covariance(&origin);

    let eig = lambda_star.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let d_star: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if let Some(&bad) = d_star.iter().find(|v| **v <= 0.0 || !v.is_finite()) {
        return Err(SpectralError::NonPdHessian { eigenvalue: bad });
    }

    // Columns of `u` are eigenvectors in ascending eigenvalue order, each
    // oriented so its largest-magnitude entry is positive (deterministic,
    // and yields Q = I for an already diagonal curvature).
    let mut u = DMatrix::zeros(d, d);
    for (col, &src) in order.iter().enumerate() {
        let mut vmax = 0.0f64;
        for i in 0..d {
            let v = eig.eigenvectors[(i, src)];
            if v.abs() > vmax.abs() {
                vmax = v;
            }
        }
        let sign = if vmax < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            u[(i, col)] = sign * eig.eigenvectors[(i, src)];
        }
    }
    // The symmetric eigensolver is orthonormal to machine precision; if a
    // near-degenerate cluster ever spoils that, one QR pass restores it.
    if (u.transpose() * &u - DMatrix::identity(d, d)).norm() > 1e-10 {
        let qr = u.clone().qr();
        let r_diag: Vec<f64> = (0..d).map(|i| qr.r()[(i, i)]).collect();
        u = qr.q();
        for (col, rv) in r_diag.iter().enumerate() {
            if *rv < 0.0 {
                for i in 0..d {
                    u[(i, col)] = -u[(i, col)];
                }
            }
        }
    }
    let q = u.transpose();

    let inv_diag =
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, d_star.iter().map(|v| 1.0 / v)));
    let lambda_inv = &u * inv_diag * u.transpose();
    let mut sigma_star = &lambda_inv * &s_star * &lambda_inv;
    // Symmetrize away the last-bit asymmetry of the triple product.
    for i in 0..d {
        for j in 0..i {
            let s = 0.5 * (sigma_star[(i, j)] + sigma_star[(j, i)]);
            sigma_star[(i, j)] = s;
            sigma_star[(j, i)] = s;
        }
    }
    let trace_sigma = sigma_star.trace();
    Ok(SpectralData {
        lambda_star,
        q,
        d_star,
        s_star,
        sigma_star,
        trace_sigma,
    })
}

/// One per-mode evolution block of the stacked recursion, with its spectral
/// structure.
#[derive(Clone, Copy, Debug)]
pub struct EMuMatrix {
    /// `[[1−μγ_{n+1}, 0], [(1−μγ_{n+1})/(n+1), 1−1/(n+1)]]`.
    pub matrix: Matrix2<f64>,
    /// `{1−μγ_{n+1}, 1−1/(n+1)}`.
    pub eigenvalues: [f64; 2],
    /// `ε` of the eigenvector `(1, ε)` for the first eigenvalue (the second
    /// is always `(0, 1)`); `None` when `μγ_{n+1}(n+1) = 1`, where the block
    /// degenerates to a Jordan cell.
    pub shear: Option<f64>,
}

/// The block governing one curvature mode `μ` over the step `n → n+1`.
pub fn e_mu_matrix(sched: &StepSchedule, mu: f64, n: u64) -> EMuMatrix {
    let a = 1.0 - mu * sched.step(n + 1);
    let np1 = (n + 1) as f64;
    let b = 1.0 - 1.0 / np1;
    EMuMatrix {
        matrix: Matrix2::new(a, 0.0, a / np1, b),
        eigenvalues: [a, b],
        shear: epsilon_mu(sched, mu, n).ok(),
    }
}

/// The full `2d×2d` evolution matrix with its shear factorization.
#[derive(Clone, Debug)]
pub struct AnMatrix {
    pub matrix: DMatrix<f64>,
    /// Unit lower-triangular shear `P` (identity plus `ε_i` at `(d+i, i)`).
    pub shear: DMatrix<f64>,
    /// Diagonal of eigenvalues `(1−γ_{n+1}μ_i*, …, 1−1/(n+1), …)`.
    pub modes: DMatrix<f64>,
    pub shear_inv: DMatrix<f64>,
}

impl AnMatrix {
    /// `‖P·M·P⁻¹ − A‖_F / ‖A‖_F`.
    pub fn reconstruction_residual(&self) -> f64 {
        (&self.shear * &self.modes * &self.shear_inv - &self.matrix).norm() / self.matrix.norm()
    }
}

/// Assembles the stacked evolution matrix for eigenvalues `d_star` at step
/// `n → n+1` and its three-factor form. Errors when any mode is at its
/// non-diagonalizable index.
pub fn a_n_matrix(
    sched: &StepSchedule,
    d_star: &[f64],
    n: u64,
) -> Result<AnMatrix, SpectralError> {
    let d = d_star.len();
    assert!(d >= 1);
    let np1 = (n + 1) as f64;
    let b = 1.0 - 1.0 / np1;
    let gamma = sched.step(n + 1);
    let mut matrix = DMatrix::zeros(2 * d, 2 * d);
    let mut shear = DMatrix::identity(2 * d, 2 * d);
    let mut shear_inv = DMatrix::identity(2 * d, 2 * d);
    let mut modes = DMatrix::zeros(2 * d, 2 * d);
    for (i, &mu) in d_star.iter().enumerate() {
        let a = 1.0 - mu * gamma;
        let eps = epsilon_mu(sched, mu, n)
            .map_err(|_| SpectralError::DegenerateShear { mode: i, n })?;
        matrix[(i, i)] = a;
        matrix[(d + i, i)] = a / np1;
        matrix[(d + i, d + i)] = b;
        shear[(d + i, i)] = eps;
        shear_inv[(d + i, i)] = -eps;
        modes[(i, i)] = a;
        modes[(d + i, d + i)] = b;
    }
    Ok(AnMatrix {
        matrix,
        shear,
        modes,
        shear_inv,
    })
}

/// Nodes and weights of `n`-point Gauss–Legendre quadrature on `[0, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub(crate) fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, dp)
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..64 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        nodes[k] = 0.5 * (1.0 + x);
        weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

const QUADRATURE_NODES: usize = 32;

/// The stacked state at one checkpoint: the linearized-recursion state
/// `Z = (θ_n, θ̂_n)`, its rotation `Ž = (Qθ_n, Qθ̂_n)`, and the sheared
/// `Z̃` (defined once every shear coefficient is past its degenerate index).
#[derive(Clone, Debug, Serialize)]
pub struct CoupledState {
    pub n: u64,
    pub z: Vec<f64>,
    pub z_check: Vec<f64>,
    pub z_tilde: Option<Vec<f64>>,
}

/// Residual summary of one replay.
#[derive(Clone, Debug)]
pub struct ReplayReport {
    pub checkpoints: Vec<u64>,
    pub states: Vec<CoupledState>,
    /// First index from which every mode's shear coefficient is defined.
    pub n0: u64,
    /// Max over steps of `‖Z_block − direct‖/(1+‖direct‖)` for both blocks.
    pub max_replay_mismatch: f64,
    /// Max over steps of `‖Λ_nθ_n − ∇f(θ_n)‖/(1+‖θ_n‖)`.
    pub max_quadrature_residual: f64,
    /// Max over steps of the rotation-coupling residual
    /// `‖Ž − blockdiag(Q,Q)Z‖_∞`.
    pub max_coupling_residual: f64,
    /// Max over steps of `‖v̌_{n+1}‖` (zero for constant curvature).
    pub max_vcheck_norm: f64,
    /// First step where the replay mismatch exceeded `10⁻¹⁰` or the
    /// quadrature identity exceeded `10⁻⁸`.
    pub breach: Option<u64>,
}

const REPLAY_TOL: f64 = 1e-10;
const QUADRATURE_TOL: f64 = 1e-8;

/// Replays `n_max` steps of the recursion in the linearized stacked form
/// and verifies it against the direct recursion driven by the same noise.
///
/// Per step, with `Λ_n = ∫₀¹ D²f(tθ_n) dt` (32-node Gauss–Legendre) and
/// score noise `ΔM_{n+1} = ∇f(θ_n) − Λ(θ_n, Z_{n+1})`:
///
/// - first block: `z_{n+1} = (I − γ_{n+1}Λ_n) z_n + γ_{n+1} ΔM_{n+1}`,
/// - second block: running average of the first,
/// - rotated form: `ž_{n+1} = (I − γ_{n+1}D*) ž_n + γ_{n+1} QΔM_{n+1} + v̌_{n+1}`
///   with `v̌_{n+1} = γ_{n+1} Q(Λ* − Λ_n) z_n` (its second-block injection is
///   absorbed exactly by averaging the rotated first block).
pub fn trace_coupled_recursion<P: Problem + ?Sized>(
    problem: &P,
    spectral: &SpectralData,
    sched: StepSchedule,
    theta0: &[f64],
    n_max: u64,
    checkpoints: &[u64],
    rng: &mut ChaCha8Rng,
) -> Result<ReplayReport, DivergenceError> {
    let d = problem.dim();
    assert_eq!(spectral.dim(), d);
    assert!(
        checkpoints.windows(2).all(|w| w[0] < w[1]),
        "checkpoints must be strictly increasing"
    );
    let steps = sched.step_table(n_max);
    let (nodes, weights) = gauss_legendre_unit(QUADRATURE_NODES);
    let n0 = spectral
        .d_star
        .iter()
        .map(|&mu| epsilon_scan_start(&sched, mu))
        .max()
        .unwrap();

    // Direct recursion (the reference), with compensated averaging exactly
    // as the run loop performs it.
    let mut theta = theta0.to_vec();
    let mut theta_bar = vec![0.0; d];
    let mut bar_comp = vec![0.0; d];
    // Linearized stacked state.
    let mut z1 = theta0.to_vec();
    let mut z2 = vec![0.0; d];
    // Rotated state.
    let mut zc1: Vec<f64> = mat_vec(&spectral.q, theta0);
    let mut zc2 = vec![0.0; d];

    let mut lam_sample = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut scaled = vec![0.0; d];

    let mut report = ReplayReport {
        checkpoints: checkpoints.to_vec(),
        states: Vec::with_capacity(checkpoints.len()),
        n0,
        max_replay_mismatch: 0.0,
        max_quadrature_residual: 0.0,
        max_coupling_residual: 0.0,
        max_vcheck_norm: 0.0,
        breach: None,
    };
    let mut next_cp = 0usize;

    for (k, &gamma) in steps.iter().enumerate() {
        let n_new = (k + 1) as u64;
        let count = (k + 1) as f64;
        problem.sample_gradient_into(&theta, &mut lam_sample, rng);
        problem.gradient_into(&theta, &mut grad);

        // Lambda_n = sum_j w_j D^2 f(t_j * theta).
        let mut lambda_n = DMatrix::zeros(d, d);
        for (t, w) in nodes.iter().zip(&weights) {
            for i in 0..d {
                scaled[i] = t * theta[i];
            }
            let h = problem.hessian(&scaled);
            lambda_n += h * *w;
        }
        let theta_norm = norm(&theta);
        let lam_theta = mat_vec(&lambda_n, &theta);
        let quad_res = sub_norm(&lam_theta, &grad) / (1.0 + theta_norm);
        report.max_quadrature_residual = report.max_quadrature_residual.max(quad_res);
        if quad_res > QUADRATURE_TOL && report.breach.is_none() {
            report.breach = Some(n_new);
        }

        // v_check = gamma * Q (Lambda* - Lambda_n) z1.
        let diff = &spectral.lambda_star - &lambda_n;
        let dz = mat_vec(&diff, &z1);
        let mut vcheck = mat_vec(&spectral.q, &dz);
        vcheck.iter_mut().for_each(|v| *v *= gamma);
        report.max_vcheck_norm = report.max_vcheck_norm.max(norm(&vcheck));

        // Linearized first block, then its running average.
        let lam_z = mat_vec(&lambda_n, &z1);
        let q_dm: Vec<f64> = {
            let dm: Vec<f64> = grad.iter().zip(&lam_sample).map(|(g, s)| g - s).collect();
            mat_vec(&spectral.q, &dm)
        };
        for i in 0..d {
            z1[i] = z1[i] - gamma * lam_z[i] + gamma * (grad[i] - lam_sample[i]);
        }
        for i in 0..d {
            z2[i] += (z1[i] - z2[i]) / count;
        }
        // Rotated blocks.
        for i in 0..d {
            zc1[i] = (1.0 - gamma * spectral.d_star[i]) * zc1[i] + gamma * q_dm[i] + vcheck[i];
        }
        for i in 0..d {
            zc2[i] += (zc1[i] - zc2[i]) / count;
        }

        // Direct recursion.
        let mut max_abs = 0.0f64;
        for i in 0..d {
            theta[i] -= gamma * lam_sample[i];
            max_abs = max_abs.max(theta[i].abs());
        }
        if max_abs > crate::sgd::DIVERGENCE_LIMIT || max_abs.is_nan() {
            return Err(DivergenceError {
                step: n_new,
                magnitude: max_abs,
            });
        }
        for i in 0..d {
            let delta = (theta[i] - theta_bar[i]) / count;
            kahan_add(&mut theta_bar[i], &mut bar_comp[i], delta);
        }

        // Replay-vs-direct and rotation-coupling residuals.
        let mismatch = (sub_norm(&z1, &theta) / (1.0 + norm(&theta)))
            .max(sub_norm(&z2, &theta_bar) / (1.0 + norm(&theta_bar)));
        report.max_replay_mismatch = report.max_replay_mismatch.max(mismatch);
        if mismatch > REPLAY_TOL && report.breach.is_none() {
            report.breach = Some(n_new);
        }
        let rot1 = mat_vec(&spectral.q, &z1);
        let rot2 = mat_vec(&spectral.q, &z2);
        let coupling = zc1
            .iter()
            .zip(&rot1)
            .chain(zc2.iter().zip(&rot2))
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        report.max_coupling_residual = report.max_coupling_residual.max(coupling);

        if next_cp < checkpoints.len() && checkpoints[next_cp] == n_new {
            let z_tilde = if n_new > n0 {
                let mut zt = zc1.clone();
                zt.extend(zc2.iter().zip(&zc1).enumerate().map(|(i, (c2, c1))| {
                    let eps = epsilon_at(&sched, spectral.d_star[i], n_new)
                        .expect("past the degenerate index");
                    c2 - eps * c1
                }));
                Some(zt)
            } else {
                None
            };
            let mut z = z1.clone();
            z.extend_from_slice(&z2);
            let mut z_check = zc1.clone();
            z_check.extend_from_slice(&zc2);
            report.states.push(CoupledState {
                n: n_new,
                z,
                z_check,
                z_tilde,
            });
            next_cp += 1;
        }
    }
    Ok(report)
}

/// Streaming mean/variance; exactly zero variance on a constant stream.
#[derive(Clone, Copy, Debug)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Welford {
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance.
    fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn sub_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let (rows, cols) = m.shape();
    debug_assert_eq!(cols, v.len());
    (0..rows)
        .map(|i| (0..cols).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// Cross-moment decay diagnostics computed from replicated runs.
#[derive(Clone, Debug, Serialize)]
pub struct OmegaReport {
    pub replications: usize,
    /// Checkpoints, all past the shear-stabilization index `n₀`.
    pub checkpoints: Vec<u64>,
    /// `ω̂_n(i) = mean[(Z̃_n)_i (Z̃_n)_{d+i}]`, indexed `[checkpoint][mode]`.
    pub omega: Vec<Vec<f64>>,
    pub omega_se: Vec<Vec<f64>>,
    /// `sup_n n·|ω̂_n(i)|` per mode.
    pub sup_n_omega: Vec<f64>,
    /// `n · mean|Z̃⁽²⁾_n|²` per checkpoint.
    pub n_z2: Vec<f64>,
    /// The last entry of `n_z2`: the plug-in estimate of `Tr(Σ*)`.
    pub limit_estimate: f64,
}

impl OmegaReport {
    /// CSV rows `n, i, omega_hat, se, n_times_z2` (the last column repeats
    /// the per-checkpoint scalar on each mode row).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "n,i,omega_hat,se,n_times_z2")?;
        for (j, &n) in self.checkpoints.iter().enumerate() {
            for i in 0..self.omega[j].len() {
                writeln!(
                    w,
                    "{n},{i},{},{},{}",
                    self.omega[j][i], self.omega_se[j][i], self.n_z2[j]
                )?;
            }
        }
        Ok(())
    }
}

/// Estimates `ω_n(i)` and `n·E|Z̃⁽²⁾_n|²` over at least `10³` replications.
///
/// The rotated state is computed exactly from the direct iterates
/// (`Ž = (Qθ, Qθ̂)`), so the diagnostic needs no per-step quadrature; the
/// shear uses the same-index coefficients `ε_{μᵢ,n}` and is only defined
/// past `n₀`.
pub fn omega_diagnostic<P: Problem + ?Sized>(
    problem: &P,
    spectral: &SpectralData,
    sched: StepSchedule,
    theta0: &[f64],
    n_max: u64,
    replications: usize,
    seed: u64,
) -> Result<OmegaReport, DivergenceError> {
    assert!(replications >= 1_000, "need at least 1e3 replications");
    let d = problem.dim();
    let n0 = spectral
        .d_star
        .iter()
        .map(|&mu| epsilon_scan_start(&sched, mu))
        .max()
        .unwrap();
    let lo = 10.max(n0 + 1);
    assert!(lo < n_max, "n_max must exceed the stabilization index");
    let checkpoints = geometric_index_grid(lo, n_max, 10);
    let eps: Vec<Vec<f64>> = checkpoints
        .iter()
        .map(|&n| {
            spectral
                .d_star
                .iter()
                .map(|&mu| epsilon_at(&sched, mu, n).expect("past the degenerate index"))
                .collect()
        })
        .collect();

    let steps = sched.step_table(n_max);
    let mut moments = vec![vec![Welford::new(); d]; checkpoints.len()];
    let mut z2_sum = vec![KahanSum::new(); checkpoints.len()];
    for rep in 0..replications {
        let mut rng = replication_rng(seed, rep as u64);
        let record = run_with_steps(problem, sched, &steps, theta0, &checkpoints, 0, &mut rng)?;
        for (j, _) in checkpoints.iter().enumerate() {
            let zc1 = mat_vec(&spectral.q, &record.theta[j]);
            let zc2 = mat_vec(&spectral.q, &record.theta_bar[j]);
            let mut z2_norm = 0.0;
            for i in 0..d {
                let zt2 = zc2[i] - eps[j][i] * zc1[i];
                moments[j][i].add(zc1[i] * zt2);
                z2_norm += zt2 * zt2;
            }
            z2_sum[j].add(z2_norm);
        }
    }

    let r = replications as f64;
    let mut omega = Vec::with_capacity(checkpoints.len());
    let mut omega_se = Vec::with_capacity(checkpoints.len());
    let mut n_z2 = Vec::with_capacity(checkpoints.len());
    let mut sup_n_omega = vec![0.0f64; d];
    for (j, &n) in checkpoints.iter().enumerate() {
        let mut row = Vec::with_capacity(d);
        let mut se_row = Vec::with_capacity(d);
        for i in 0..d {
            let mean = moments[j][i].mean();
            row.push(mean);
            se_row.push((moments[j][i].variance() / r).sqrt());
            sup_n_omega[i] = sup_n_omega[i].max(n as f64 * mean.abs());
        }
        omega.push(row);
        omega_se.push(se_row);
        n_z2.push(n as f64 * z2_sum[j].value() / r);
    }
    Ok(OmegaReport {
        replications,
        checkpoints,
        omega,
        omega_se,
        sup_n_omega,
        limit_estimate: *n_z2.last().unwrap(),
        n_z2,
    })
}

//! `rpavg check`: assumption checkers selected by config, one JSON report
//! per checker.

use serde_json::json;

use rpavg_core::assumptions::{
    check_h_kl, check_h_phi, check_noise_moments, descent_diagnostic, region_points,
    verify_growth_by_flow, DescentConfig, FlowOutcome, PhiFunction, DEFAULT_DRIFT_FLOOR,
    REGION_EXCLUSION,
};
use rpavg_core::problems::Problem;
use rpavg_core::schedule::StepSchedule;
use rpavg_core::spectral::compute_sigma_star;

use crate::config::Config;
use crate::error::CliError;
use crate::out::{matrix_rows, prepare_out_dir, write_json};
use crate::problem::{build_problem, displacement};
use crate::CheckArgs;

const KNOWN_CHECKERS: [&str; 6] = [
    "h_phi",
    "h_kl",
    "noise_moments",
    "growth_flow",
    "descent",
    "spectral",
];

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Fail => "fail",
        }
    }
}

pub fn cmd_check(args: &CheckArgs) -> Result<(), CliError> {
    let cfg = Config::load(&args.config)?;
    let problem = build_problem(&cfg)?;

    let selection = parse_selection(&cfg)?;

    // Parse every checker's parameters up front — keys for unselected
    // checkers stay valid config — then reject true strangers.
    let params = CheckerParams::parse(&cfg, &*problem)?;
    if selection.iter().any(|n| n == "growth_flow") {
        if params.growth_m.is_none() {
            return Err(CliError::Usage(
                "missing required config key `growth_flow.m` (growth_flow checker selected)".into(),
            ));
        }
        if params.growth_starts.is_none() {
            return Err(CliError::Usage(
                "missing required config key `growth_flow.starts` (growth_flow checker selected)"
                    .into(),
            ));
        }
    }
    cfg.finish()?;

    let files: Vec<String> = selection.iter().map(|n| format!("check-{n}.json")).collect();
    let paths = prepare_out_dir(&args.out, &files, args.overwrite)?;

    let mut failed = Vec::new();
    for (name, path) in selection.iter().zip(&paths) {
        let (verdict, summary, report) = run_checker(name, &*problem, &params)?;
        let doc = json!({
            "checker": name,
            "problem": problem.name(),
            "verdict": verdict.label(),
            "summary": summary,
            "config": cfg.to_json(),
            "report": report,
        });
        write_json(path, &doc)?;
        println!("{name}: {} — {summary}", verdict.label());
        if verdict == Verdict::Fail {
            failed.push(name.clone());
        }
    }

    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!(
            "checker violation: {}",
            failed.join(", ")
        )))
    }
}

fn parse_selection(cfg: &Config) -> Result<Vec<String>, CliError> {
    let raw = cfg.require("checkers")?;
    let mut names = Vec::new();
    for piece in raw.split(',') {
        let name = piece.trim();
        if name.is_empty() {
            continue;
        }
        if !KNOWN_CHECKERS.contains(&name) {
            return Err(CliError::Usage(format!(
                "unknown checker `{name}` (expected one of {})",
                KNOWN_CHECKERS.join(", ")
            )));
        }
        if !names.contains(&name.to_string()) {
            names.push(name.to_string());
        }
    }
    if names.is_empty() {
        return Err(CliError::Usage("empty checker selection".into()));
    }
    Ok(names)
}

/// Every tunable of every checker, with defaults.
struct CheckerParams {
    hphi_phi: PhiFunction,
    hphi_radius: f64,
    hphi_points: usize,
    hphi_exclusion: f64,
    hphi_seed: u64,
    hphi_floor: f64,

    hkl_r: f64,
    hkl_radii: Vec<f64>,
    hkl_seed: u64,

    nm_phi: PhiFunction,
    nm_p: f64,
    nm_draws: usize,
    nm_u: Vec<f64>,
    nm_points: usize,
    nm_radius: f64,
    nm_exclusion: f64,
    nm_seed: u64,

    growth_r: f64,
    growth_m: Option<f64>,
    growth_starts: Option<Vec<Vec<f64>>>,
    growth_tol: f64,

    descent_phi: PhiFunction,
    descent_p: f64,
    descent_schedule: StepSchedule,
    descent_theta0: Option<Vec<f64>>,
    descent_cfg: DescentConfig,

    spectral_tol: f64,
}

impl CheckerParams {
    fn parse(cfg: &Config, problem: &dyn Problem) -> Result<Self, CliError> {
        let default_r = problem.kl_exponent().unwrap_or(0.0);

        let hphi_exclusion: f64 = cfg.get_or("h_phi.exclusion", REGION_EXCLUSION)?;
        let nm_exclusion: f64 = cfg.get_or("noise_moments.exclusion", REGION_EXCLUSION)?;
        for (key, v) in [
            ("h_phi.exclusion", hphi_exclusion),
            ("noise_moments.exclusion", nm_exclusion),
        ] {
            if v < REGION_EXCLUSION {
                return Err(CliError::Usage(format!(
                    "config key `{key}`: must be ≥ {REGION_EXCLUSION:e}"
                )));
            }
        }

        let nm_draws: usize = cfg.get_or("noise_moments.draws", 20_000)?;
        if nm_draws < 10_000 {
            return Err(CliError::Usage(
                "config key `noise_moments.draws`: need at least 10000 draws per point".into(),
            ));
        }

        let hkl_radii = cfg
            .get_f64_list("h_kl.radii")?
            .unwrap_or_else(|| vec![5.0, 10.0, 20.0, 40.0]);
        if hkl_radii.len() < 3 || hkl_radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Usage(
                "config key `h_kl.radii`: need at least 3 strictly increasing radii".into(),
            ));
        }

        let growth_r: f64 = cfg.get_or("growth_flow.r", default_r)?;
        if !(0.0..=0.5).contains(&growth_r) {
            return Err(CliError::Usage(format!(
                "config key `growth_flow.r`: exponent must lie in [0, 1/2], got {growth_r}"
            )));
        }
        let growth_m: Option<f64> = cfg.get_parsed("growth_flow.m")?;
        if let Some(m) = growth_m {
            if m <= 0.0 || m.is_nan() {
                return Err(CliError::Usage(format!(
                    "config key `growth_flow.m`: must be positive, got {m}"
                )));
            }
        }
        let growth_tol: f64 = cfg.get_or("growth_flow.ode_tolerance", 1e-6)?;
        if growth_tol <= 0.0 || growth_tol.is_nan() {
            return Err(CliError::Usage(
                "config key `growth_flow.ode_tolerance`: must be positive".into(),
            ));
        }

        let descent_gamma: f64 = cfg.get_or("descent.gamma", 1.0)?;
        let descent_beta: f64 = cfg.get_or("descent.beta", 0.75)?;
        let descent_schedule = StepSchedule::new(descent_gamma, descent_beta)
            .map_err(|e| CliError::Usage(format!("descent.gamma/descent.beta: {e}")))?;
        let descent_cfg = DescentConfig {
            replications: cfg.get_or("descent.replications", 500)?,
            n_max: cfg.get_u64_or("descent.n_max", 10_000)?,
            n0: cfg.get_u64_or("descent.n0", 100)?,
            seed: cfg.get_u64_or("descent.seed", 0x6465_7363)?,
        };
        if descent_cfg.replications < 500 {
            return Err(CliError::Usage(
                "config key `descent.replications`: need at least 500".into(),
            ));
        }
        if descent_cfg.n_max < 10 || descent_cfg.n0 >= descent_cfg.n_max {
            return Err(CliError::Usage(
                "config keys `descent.n_max`/`descent.n0`: need n_max ≥ 10 and n0 < n_max".into(),
            ));
        }

        let spectral_tol: f64 = cfg.get_or("spectral.tolerance", 1e-10)?;
        if spectral_tol <= 0.0 || spectral_tol.is_nan() {
            return Err(CliError::Usage(
                "config key `spectral.tolerance`: must be positive".into(),
            ));
        }

        Ok(Self {
            hphi_phi: phi_for(cfg, "h_phi", default_r)?,
            hphi_radius: cfg.get_or("h_phi.radius", 10.0)?,
            hphi_points: cfg.get_or("h_phi.points", 200)?,
            hphi_exclusion,
            hphi_seed: cfg.get_u64_or("h_phi.seed", 0x6870)?,
            hphi_floor: cfg.get_or("h_phi.floor", DEFAULT_DRIFT_FLOOR)?,
            hkl_r: cfg.get_or("h_kl.r", default_r)?,
            hkl_radii,
            hkl_seed: cfg.get_u64_or("h_kl.seed", 11)?,
            nm_phi: phi_for(cfg, "noise_moments", default_r)?,
            nm_p: cfg.get_or("noise_moments.p", 2.0)?,
            nm_draws,
            nm_u: cfg
                .get_f64_list("noise_moments.u")?
                .unwrap_or_else(|| vec![0.25, 0.5, 1.0]),
            nm_points: cfg.get_or("noise_moments.points", 5)?,
            nm_radius: cfg.get_or("noise_moments.radius", 3.0)?,
            nm_exclusion,
            nm_seed: cfg.get_u64_or("noise_moments.seed", 0x6e6d)?,
            growth_r,
            growth_m,
            growth_starts: cfg.get_vector_list("growth_flow.starts")?,
            growth_tol,
            descent_phi: phi_for(cfg, "descent", default_r)?,
            descent_p: cfg.get_or("descent.p", 2.0)?,
            descent_schedule,
            descent_theta0: cfg.get_f64_list("descent.theta0")?,
            descent_cfg,
            spectral_tol,
        })
    }
}

/// `<prefix>.phi = one` or `<prefix>.r = <r>`; default is the problem's
/// declared flatness class (exponent 1/2 collapses to the constant φ).
fn phi_for(cfg: &Config, prefix: &str, default_r: f64) -> Result<PhiFunction, CliError> {
    let named = cfg.get(&format!("{prefix}.phi")).map(str::to_string);
    let r: Option<f64> = cfg.get_parsed(&format!("{prefix}.r"))?;
    match (named.as_deref(), r) {
        (Some("one"), None) => Ok(PhiFunction::One),
        (Some("one"), Some(_)) => Err(CliError::Usage(format!(
            "config keys `{prefix}.phi` and `{prefix}.r` conflict: the constant φ has no exponent"
        ))),
        (Some("power") | None, Some(r)) => PhiFunction::power(r)
            .map_err(|e| CliError::Usage(format!("config key `{prefix}.r`: {e}"))),
        (Some("power"), None) => Err(CliError::Usage(format!(
            "config key `{prefix}.phi` = power needs `{prefix}.r`"
        ))),
        (Some(other), _) => Err(CliError::Usage(format!(
            "config key `{prefix}.phi`: expected one or power, got `{other}`"
        ))),
        (None, None) => PhiFunction::power(default_r).map_err(|e| {
            CliError::Usage(format!(
                "problem declares flatness exponent {default_r} outside [0, 1/2]: {e}"
            ))
        }),
    }
}

fn run_checker(
    name: &str,
    problem: &dyn Problem,
    params: &CheckerParams,
) -> Result<(Verdict, String, serde_json::Value), CliError> {
    match name {
        "h_phi" => {
            let points = region_points(
                problem.dim(),
                params.hphi_exclusion,
                params.hphi_radius,
                params.hphi_points,
                params.hphi_seed,
            );
            let report = check_h_phi(problem, params.hphi_phi, &points, params.hphi_floor);
            let verdict = if report.pass { Verdict::Pass } else { Verdict::Fail };
            let summary = format!(
                "drift window [{:.4}, {:.4}] over {} points, {} violation(s)",
                report.m_hat,
                report.m_upper_hat,
                report.grid_points,
                report.violations.len()
            );
            Ok((verdict, summary, to_value(&report)?))
        }
        "h_kl" => {
            let report = check_h_kl(problem, params.hkl_r, &params.hkl_radii, params.hkl_seed);
            let verdict = if report.pass { Verdict::Pass } else { Verdict::Fail };
            let summary = format!(
                "liminf estimate {:.4} at radius {}",
                report.liminf_estimate,
                params.hkl_radii.last().expect("radii validated non-empty")
            );
            Ok((verdict, summary, to_value(&report)?))
        }
        "noise_moments" => {
            let theta_points = region_points(
                problem.dim(),
                params.nm_exclusion,
                params.nm_radius,
                params.nm_points,
                params.nm_seed,
            );
            let report = check_noise_moments(
                problem,
                params.nm_phi,
                params.nm_p,
                &theta_points,
                &params.nm_u,
                params.nm_draws,
                params.nm_seed,
            );
            let verdict = if report.pass { Verdict::Pass } else { Verdict::Fail };
            let summary = format!(
                "max estimate {:.4e} over {} θ-points × {} u-values, {} overflow(s)",
                report.max_entry,
                report.theta_points.len(),
                report.u_grid.len(),
                report.overflow.len()
            );
            Ok((verdict, summary, to_value(&report)?))
        }
        "growth_flow" => {
            let m = params.growth_m.expect("validated before dispatch");
            let starts_public = params.growth_starts.as_ref().expect("validated");
            let mut starts = Vec::with_capacity(starts_public.len());
            for s in starts_public {
                starts.push(displacement(problem, s)?);
            }
            let cert =
                verify_growth_by_flow(problem, params.growth_r, m, &starts, params.growth_tol);
            let verdict = match cert.outcome {
                FlowOutcome::Certified => Verdict::Pass,
                FlowOutcome::Inconclusive => Verdict::Inconclusive,
                FlowOutcome::Refuted => Verdict::Fail,
            };
            let worst = cert
                .points
                .iter()
                .map(|p| p.margin)
                .fold(f64::INFINITY, f64::min);
            let summary = format!(
                "{} with m = {m}, worst margin {worst:.6}",
                match cert.outcome {
                    FlowOutcome::Certified => "certified",
                    FlowOutcome::Inconclusive => "inconclusive",
                    FlowOutcome::Refuted => "refuted",
                }
            );
            Ok((verdict, summary, to_value(&cert)?))
        }
        "descent" => {
            let default_theta0: Vec<f64> =
                problem.theta_star().iter().map(|s| s + 0.5).collect();
            let theta0_public = params
                .descent_theta0
                .clone()
                .unwrap_or(default_theta0);
            let theta0 = displacement(problem, &theta0_public)?;
            let report = descent_diagnostic(
                problem,
                params.descent_phi,
                params.descent_p,
                &params.descent_schedule,
                &theta0,
                &params.descent_cfg,
            );
            let verdict = if report.pass { Verdict::Pass } else { Verdict::Fail };
            let summary = format!(
                "normalized Lyapunov curve bounded: {}; fitted one-step constants c1 = {:.4}, c2 = {:.4}",
                report.pass, report.c1, report.c2
            );
            Ok((verdict, summary, to_value(&report)?))
        }
        "spectral" => match compute_sigma_star(problem) {
            Ok(data) => {
                let orth = data.orthonormality_residual();
                let rec = data.reconstruction_residual();
                let pass = orth <= params.spectral_tol && rec <= params.spectral_tol;
                let verdict = if pass { Verdict::Pass } else { Verdict::Fail };
                let summary = format!(
                    "trace {:.6}; orthonormality residual {orth:.2e}, reconstruction residual {rec:.2e}",
                    data.trace_sigma
                );
                let report = json!({
                    "trace_sigma": data.trace_sigma,
                    "d_star": data.d_star,
                    "sigma_star": matrix_rows(&data.sigma_star),
                    "orthonormality_residual": orth,
                    "reconstruction_residual": rec,
                    "tolerance": params.spectral_tol,
                    "pass": pass,
                });
                Ok((verdict, summary, report))
            }
            Err(e) => Ok((
                Verdict::Fail,
                format!("asymptotic covariance unavailable: {e}"),
                json!({ "error": e.to_string() }),
            )),
        },
        other => unreachable!("selection validated: {other}"),
    }
}

fn to_value<T: serde::Serialize>(report: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(report)
        .map_err(|e| CliError::Usage(format!("cannot serialize checker report: {e}")))
}

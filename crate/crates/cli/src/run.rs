//! `rpavg run`: one Monte Carlo averaging experiment, artifacts on disk.

use std::fmt::Write as _;

use serde_json::json;

use rpavg_core::fit::fit_rate;
use rpavg_core::montecarlo::{
    first_order_check, run_experiment, write_mse_csv, EstimatorSelection, ExperimentConfig,
    ExperimentOutput, MseCurve,
};
use rpavg_core::problems::Problem;
use rpavg_core::schedule::StepSchedule;
use rpavg_core::sgd::Estimator;
use rpavg_core::spectral::{compute_sigma_star, SpectralData};

use crate::config::Config;
use crate::error::CliError;
use crate::out::{matrix_rows, prepare_out_dir, write_json, write_text};
use crate::problem::{build_problem, displacement};
use crate::RunArgs;

const RUN_FILES: [&str; 5] = [
    "mse.csv",
    "ratefit.json",
    "sigma_star.json",
    "run-manifest.json",
    "plot.gp",
];

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = Config::load(&args.config)?;
    let problem = build_problem(&cfg)?;

    let gamma: f64 = cfg.require_parsed("schedule.gamma")?;
    let beta: f64 = cfg.require_parsed("schedule.beta")?;
    let schedule = StepSchedule::new(gamma, beta)
        .map_err(|e| CliError::Usage(format!("schedule.*: {e}")))?;

    let n_max = cfg.require_u64("run.n_max")?;
    if n_max == 0 {
        return Err(CliError::Usage("config key `run.n_max`: must be ≥ 1".into()));
    }
    let replications: usize = cfg.require_parsed("run.replications")?;
    if replications == 0 {
        return Err(CliError::Usage(
            "config key `run.replications`: must be ≥ 1".into(),
        ));
    }
    let config_seed = cfg.require_u64("run.master_seed")?;
    let (master_seed, seed_source) = effective_seed(config_seed)?;
    let points_per_decade: u32 = cfg.get_or("run.points_per_decade", 10)?;
    if points_per_decade == 0 {
        return Err(CliError::Usage(
            "config key `run.points_per_decade`: must be ≥ 1".into(),
        ));
    }
    let estimator = match cfg.get("run.estimator").unwrap_or("averaged") {
        "averaged" => EstimatorSelection::Averaged,
        "raw" => EstimatorSelection::Raw,
        "both" => EstimatorSelection::Both,
        other => {
            return Err(CliError::Usage(format!(
                "config key `run.estimator`: expected averaged, raw, or both, got `{other}`"
            )))
        }
    };
    let theta0_public = cfg
        .get_f64_list("run.theta0")?
        .unwrap_or_else(|| problem.theta_star());
    let theta0 = displacement(&*problem, &theta0_public)?;

    let ratio_min: Option<f64> = cfg.get_parsed("accept.ratio_min")?;
    let ratio_max: Option<f64> = cfg.get_parsed("accept.ratio_max")?;
    let min_checkpoint = n_max.min(10);
    let window_lo = cfg
        .get_u64_or("accept.window_lo", (n_max / 10).max(1))?
        .clamp(min_checkpoint, n_max);
    cfg.finish()?;

    let paths = prepare_out_dir(
        &args.out,
        &RUN_FILES.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        args.overwrite,
    )?;

    let spectral = compute_sigma_star(&*problem)
        .map_err(|e| CliError::Usage(format!("asymptotic covariance unavailable: {e}")))?;

    let exp_config = ExperimentConfig {
        schedule,
        theta0,
        n_max,
        replications,
        master_seed,
        points_per_decade,
        estimator,
    };
    let output = run_with_pool(&*problem, &exp_config, args.workers)?;

    let primary = primary_curve(&output);
    for ((n, mse), n_mse) in primary
        .checkpoints
        .iter()
        .zip(&primary.mse)
        .zip(&primary.n_times_mse)
    {
        println!("n={n:<8} mse={mse:.6e}  n*mse={n_mse:.6}");
    }

    let window = (window_lo, n_max);
    let check = first_order_check(primary, &spectral, window);
    let fit_points: Vec<(f64, f64)> = primary
        .checkpoints
        .iter()
        .zip(&primary.mse)
        .filter(|&(&n, _)| n >= window.0 && n <= window.1)
        .map(|(&n, &m)| (n as f64, m))
        .collect();
    let fit = fit_rate(&fit_points);

    let threshold_pass = ratio_min.is_none_or(|lo| check.terminal_ratio >= lo)
        && ratio_max.is_none_or(|hi| check.terminal_ratio <= hi);

    // Artifacts. Every file names the master seed and the full config.
    let header = artifact_header(&cfg, master_seed, seed_source);

    let mut csv = Vec::new();
    write_mse_csv(&output.curves, &mut csv)
        .map_err(|e| CliError::Usage(format!("cannot format mse.csv: {e}")))?;
    let csv_text = format!(
        "{header}{}",
        String::from_utf8(csv).expect("csv is valid utf-8")
    );
    write_text(&paths[0], &csv_text)?;

    let fit_json = match &fit {
        Ok(f) => json!({
            "estimator": estimator_label(primary.estimator),
            "window": [window.0, window.1],
            "slope": f.slope,
            "intercept": f.intercept,
            "residual": f.residual,
            "master_seed": master_seed,
            "config": cfg.to_json(),
        }),
        Err(e) => json!({
            "estimator": estimator_label(primary.estimator),
            "window": [window.0, window.1],
            "error": e.to_string(),
            "master_seed": master_seed,
            "config": cfg.to_json(),
        }),
    };
    write_json(&paths[1], &fit_json)?;

    write_json(&paths[2], &sigma_star_json(&*problem, &spectral, master_seed, &cfg))?;

    let manifest = json!({
        "tool": "rpavg",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "run",
        "config_path": args.config.display().to_string(),
        "config": cfg.to_json(),
        "problem": problem.name(),
        "master_seed": master_seed,
        "seed_source": seed_source,
        "replications": output.replications,
        "diverged": output.diverged,
        "estimators": output.curves.iter().map(|c| estimator_label(c.estimator)).collect::<Vec<_>>(),
        "window": [window.0, window.1],
        "trace_sigma": spectral.trace_sigma,
        "terminal_ratio": check.terminal_ratio,
        "terminal_band": [check.terminal_band.0, check.terminal_band.1],
        "threshold": match (ratio_min, ratio_max) {
            (None, None) => serde_json::Value::Null,
            _ => json!({ "ratio_min": ratio_min, "ratio_max": ratio_max, "pass": threshold_pass }),
        },
        "outputs": RUN_FILES,
    });
    write_json(&paths[3], &manifest)?;

    write_text(&paths[4], &plot_script(&header, spectral.trace_sigma))?;

    println!(
        "terminal n*mse/trace = {:.4} (band [{:.4}, {:.4}], trace {:.6}) over window [{}, {}]",
        check.terminal_ratio,
        check.terminal_band.0,
        check.terminal_band.1,
        spectral.trace_sigma,
        window.0,
        window.1
    );
    if let Ok(f) = &fit {
        println!("log-log mse slope over window: {:.4}", f.slope);
    }
    println!("artifacts written to {}", args.out.display());

    if !threshold_pass {
        return Err(CliError::Violation(format!(
            "terminal ratio {:.4} outside the declared acceptance window [{}, {}]",
            check.terminal_ratio,
            ratio_min.map_or("-inf".into(), |v| v.to_string()),
            ratio_max.map_or("+inf".into(), |v| v.to_string()),
        )));
    }
    Ok(())
}

/// Applies the `RPAVG_SEED` override (smoke tests) to the configured seed.
fn effective_seed(config_seed: u64) -> Result<(u64, &'static str), CliError> {
    match std::env::var("RPAVG_SEED") {
        Ok(raw) => {
            let cleaned: String = raw.chars().filter(|&c| c != '_').collect();
            let parsed = if let Some(hex) =
                cleaned.strip_prefix("0x").or_else(|| cleaned.strip_prefix("0X"))
            {
                u64::from_str_radix(hex, 16)
            } else {
                cleaned.parse()
            };
            let seed = parsed.map_err(|e| {
                CliError::Usage(format!("RPAVG_SEED: cannot parse `{raw}`: {e}"))
            })?;
            Ok((seed, "RPAVG_SEED"))
        }
        Err(_) => Ok((config_seed, "config")),
    }
}

fn run_with_pool(
    problem: &dyn Problem,
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<ExperimentOutput, CliError> {
    let run = || {
        run_experiment(problem, config).map_err(|e| {
            // Excess divergence indicates a mis-sized schedule, not noise.
            CliError::Usage(format!("experiment failed: {e}"))
        })
    };
    match workers {
        None => run(),
        Some(w) => {
            if w == 0 {
                return Err(CliError::Usage("--workers must be ≥ 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot build worker pool: {e}")))?;
            pool.install(run)
        }
    }
}

fn primary_curve(output: &ExperimentOutput) -> &MseCurve {
    output
        .curves
        .iter()
        .find(|c| c.estimator == Estimator::Averaged)
        .unwrap_or(&output.curves[0])
}

pub fn estimator_label(e: Estimator) -> &'static str {
    match e {
        Estimator::Raw => "raw",
        Estimator::Averaged => "averaged",
    }
}

/// `#`-comment block naming the master seed and the full config; legal as a
/// CSV preamble and as gnuplot comments alike.
fn artifact_header(cfg: &Config, master_seed: u64, seed_source: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# rpavg {} run artifact", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# master_seed = {master_seed} (from {seed_source})");
    for (k, v) in cfg.entries() {
        let _ = writeln!(out, "# config {k} = {v}");
    }
    out
}

fn sigma_star_json(
    problem: &dyn Problem,
    spectral: &SpectralData,
    master_seed: u64,
    cfg: &Config,
) -> serde_json::Value {
    json!({
        "problem": problem.name(),
        "dim": spectral.dim(),
        "trace_sigma": spectral.trace_sigma,
        "d_star": spectral.d_star,
        "lambda_star": matrix_rows(&spectral.lambda_star),
        "q": matrix_rows(&spectral.q),
        "s_star": matrix_rows(&spectral.s_star),
        "sigma_star": matrix_rows(&spectral.sigma_star),
        "orthonormality_residual": spectral.orthonormality_residual(),
        "reconstruction_residual": spectral.reconstruction_residual(),
        "master_seed": master_seed,
        "config": cfg.to_json(),
    })
}

/// Data-only gnuplot convenience script; rendering stays offline.
fn plot_script(header: &str, trace: f64) -> String {
    format!(
        "{header}\
set datafile separator \",\"\n\
set logscale x\n\
set xlabel \"n\"\n\
set ylabel \"n * MSE\"\n\
set key left top\n\
trace = {trace}\n\
plot \"mse.csv\" using 1:(strcol(5) eq \"averaged\" ? $4 : 1/0) with linespoints title \"averaged\", \\\n\
     \"mse.csv\" using 1:(strcol(5) eq \"raw\" ? $4 : 1/0) with linespoints title \"raw\", \\\n\
     trace with lines dashtype 2 title \"trace of the asymptotic covariance\"\n"
    )
}

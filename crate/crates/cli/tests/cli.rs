//! End-to-end tests for the `rpavg` binary: exit codes, artifact layout,
//! determinism across reruns and worker counts, and the bundled configs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_rpavg");

const RUN_FILES: [&str; 5] = [
    "mse.csv",
    "ratefit.json",
    "sigma_star.json",
    "run-manifest.json",
    "plot.gp",
];

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rpavg-cli-{}-{}", std::process::id(), name));
    if dir.exists() {
        fs::remove_dir_all(&dir).expect("clear stale test dir");
    }
    dir
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn rpavg(args: &[&str]) -> Output {
    rpavg_env(args, &[])
}

fn rpavg_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("RPAVG_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("rpavg binary launches")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exits with a code")
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    let text = fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    serde_json::from_str(&text)
        .unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    fs::create_dir_all(dir).expect("create config dir");
    let path = dir.join("run.conf");
    fs::write(&path, text).expect("write config");
    path
}

/// A quantile run small enough that most tests finish in well under a second.
fn small_quantile_config(extra: &str) -> String {
    format!(
        "problem.kind = quantile\n\
         problem.alpha = 0.5\n\
         schedule.gamma = 2.0\n\
         schedule.beta = 0.75\n\
         run.theta0 = 0\n\
         run.n_max = 2000\n\
         run.replications = 50\n\
         run.master_seed = 0x51\n\
         run.points_per_decade = 10\n\
         run.estimator = both\n\
         {extra}"
    )
}

fn assert_artifacts_exist(dir: &Path) {
    for name in RUN_FILES {
        assert!(dir.join(name).exists(), "missing artifact {name}");
    }
}

// --- run command ---------------------------------------------------------

#[test]
fn bundled_quantile_accept_run_passes() {
    let out_dir = temp_dir("quantile-accept");
    let cfg = bundled("quantile-accept.conf");
    let out = rpavg(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_text(&out));
    assert_artifacts_exist(&out_dir);

    let manifest = read_json(&out_dir.join("run-manifest.json"));
    let ratio = manifest["terminal_ratio"].as_f64().unwrap();
    assert!(
        (0.85..=1.15).contains(&ratio),
        "terminal n*mse/trace ratio {ratio} outside [0.85, 1.15]"
    );
    assert_eq!(manifest["threshold"]["pass"], Value::Bool(true));
    assert_eq!(manifest["master_seed"].as_u64(), Some(0x5250_4156));
    assert_eq!(manifest["seed_source"], "config");
    assert_eq!(manifest["problem"], "quantile-normal");

    let csv = fs::read_to_string(out_dir.join("mse.csv")).unwrap();
    assert!(csv.starts_with("# rpavg"), "mse.csv lacks provenance header");
    assert!(csv.contains("master_seed"), "header must name the seed");
    assert!(csv.contains("n,mse,se,n_times_mse,estimator"));
    assert!(csv.contains(",averaged") && csv.contains(",raw"));
}

#[test]
fn reruns_are_byte_identical() {
    let cfg_dir = temp_dir("rerun-cfg");
    let cfg = write_config(&cfg_dir, &small_quantile_config(""));
    let (a, b) = (temp_dir("rerun-a"), temp_dir("rerun-b"));

    let first = rpavg(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert_eq!(code(&first), 0, "stderr: {}", stderr_text(&first));
    let second = rpavg(&["run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&second), 0, "stderr: {}", stderr_text(&second));

    for name in RUN_FILES {
        let left = fs::read(a.join(name)).unwrap();
        let right = fs::read(b.join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between identical reruns");
    }

    // --overwrite replays in place and must reproduce the same bytes.
    let third = rpavg(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--overwrite",
    ]);
    assert_eq!(code(&third), 0, "stderr: {}", stderr_text(&third));
    assert_eq!(fs::read(a.join("mse.csv")).unwrap(), fs::read(b.join("mse.csv")).unwrap());
}

#[test]
fn refuses_to_clobber_without_overwrite() {
    let cfg_dir = temp_dir("clobber-cfg");
    let cfg = write_config(&cfg_dir, &small_quantile_config(""));
    let out_dir = temp_dir("clobber-out");

    let first = rpavg(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&first), 0);
    let again = rpavg(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&again), 1);
    let err = stderr_text(&again);
    assert!(err.contains("mse.csv"), "collision error names the file: {err}");
    assert!(err.contains("--overwrite"), "error suggests the flag: {err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let cfg_dir = temp_dir("unknown-key");
    let cfg = write_config(&cfg_dir, &small_quantile_config("bta = 0.9\n"));
    let out_dir = temp_dir("unknown-key-out");
    let out = rpavg(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr_text(&out).contains("bta"), "stderr: {}", stderr_text(&out));
}

#[test]
fn missing_required_key_is_usage_error() {
    let cfg_dir = temp_dir("missing-beta");
    let text = small_quantile_config("").replace("schedule.beta = 0.75\n", "");
    let cfg = write_config(&cfg_dir, &text);
    let out_dir = temp_dir("missing-beta-out");
    let out = rpavg(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr_text(&out).contains("schedule.beta"), "stderr: {}", stderr_text(&out));
}

#[test]
fn zero_replications_is_config_error() {
    let cfg_dir = temp_dir("zero-reps");
    let text = small_quantile_config("").replace("run.replications = 50", "run.replications = 0");
    let cfg = write_config(&cfg_dir, &text);
    let out_dir = temp_dir("zero-reps-out");
    let out = rpavg(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr_text(&out).contains("replications"), "stderr: {}", stderr_text(&out));
}

#[test]
fn seed_env_override_is_recorded() {
    let cfg_dir = temp_dir("seed-env");
    let cfg = write_config(&cfg_dir, &small_quantile_config(""));
    let out_dir = temp_dir("seed-env-out");
    let out = rpavg_env(
        &["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[("RPAVG_SEED", "123")],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr_text(&out));

    let manifest = read_json(&out_dir.join("run-manifest.json"));
    assert_eq!(manifest["master_seed"].as_u64(), Some(123));
    assert_eq!(manifest["seed_source"], "RPAVG_SEED");
    let csv = fs::read_to_string(out_dir.join("mse.csv")).unwrap();
    assert!(csv.contains("(from RPAVG_SEED)"), "header records the source");
}

#[test]
fn unparseable_seed_env_is_usage_error() {
    let cfg_dir = temp_dir("seed-bad");
    let cfg = write_config(&cfg_dir, &small_quantile_config(""));
    let out_dir = temp_dir("seed-bad-out");
    let out = rpavg_env(
        &["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[("RPAVG_SEED", "not-a-seed")],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr_text(&out).contains("RPAVG_SEED"), "stderr: {}", stderr_text(&out));
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg_dir = temp_dir("workers-cfg");
    let cfg = write_config(&cfg_dir, &small_quantile_config(""));
    let (a, b) = (temp_dir("workers-1"), temp_dir("workers-4"));

    let one = rpavg(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--workers", "1",
    ]);
    assert_eq!(code(&one), 0, "stderr: {}", stderr_text(&one));
    let four = rpavg(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--workers", "4",
    ]);
    assert_eq!(code(&four), 0, "stderr: {}", stderr_text(&four));

    assert_eq!(
        fs::read(a.join("mse.csv")).unwrap(),
        fs::read(b.join("mse.csv")).unwrap(),
        "results depend on worker count"
    );
}

#[test]
fn threshold_violation_exits_2_after_writing_artifacts() {
    let cfg_dir = temp_dir("threshold-cfg");
    let cfg = write_config(
        &cfg_dir,
        &small_quantile_config("accept.ratio_min = 5.0\naccept.ratio_max = 6.0\n"),
    );
    let out_dir = temp_dir("threshold-out");
    let out = rpavg(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr_text(&out));
    assert_artifacts_exist(&out_dir);

    let manifest = read_json(&out_dir.join("run-manifest.json"));
    assert_eq!(manifest["threshold"]["pass"], Value::Bool(false));
    assert!(stderr_text(&out).contains("outside the declared acceptance window"));
}

/// The other two bundled acceptance configs, shrunk to smoke size: proves
/// they parse, build their problems, and run end to end. Full-size results
/// are recorded in the README.
#[test]
fn bundled_accept_configs_run_at_smoke_size() {
    for name in ["least-squares-accept.conf", "logistic-accept.conf"] {
        let raw = fs::read_to_string(bundled(name)).unwrap();
        let shrunk: String = raw
            .lines()
            .filter(|l| !l.trim_start().starts_with("accept."))
            .map(|l| {
                let t = l.trim_start();
                if t.starts_with("run.n_max") {
                    "run.n_max = 2000".to_string()
                } else if t.starts_with("run.replications") {
                    "run.replications = 20".to_string()
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n";
        let cfg_dir = temp_dir(&format!("smoke-cfg-{name}"));
        let cfg = write_config(&cfg_dir, &shrunk);
        let out_dir = temp_dir(&format!("smoke-out-{name}"));
        let out =
            rpavg(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name} stderr: {}", stderr_text(&out));
        assert_artifacts_exist(&out_dir);
    }
}

// --- check command -------------------------------------------------------

#[test]
fn bundled_quantile_check_passes_all_six() {
    let out_dir = temp_dir("quantile-check");
    let cfg = bundled("quantile-check.conf");
    let out = rpavg(&["check", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_text(&out));

    for name in ["h_phi", "h_kl", "noise_moments", "growth_flow", "descent", "spectral"] {
        let report = read_json(&out_dir.join(format!("check-{name}.json")));
        assert_eq!(report["verdict"], "pass", "{name} verdict");
        assert_eq!(report["problem"], "quantile-normal");
        assert!(stdout_text(&out).contains(&format!("{name}: pass")));
    }
}

#[test]
fn bundled_log_growth_check_reports_violation() {
    let out_dir = temp_dir("log-growth-check");
    let cfg = bundled("log-growth-check.conf");
    let out = rpavg(&["check", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr_text(&out));
    assert!(stderr_text(&out).contains("checker violation"));

    let report = read_json(&out_dir.join("check-h_kl.json"));
    assert_eq!(report["verdict"], "fail");
    assert_eq!(report["report"]["pass"], Value::Bool(false));
}

#[test]
fn empty_checker_selection_is_usage_error() {
    let cfg_dir = temp_dir("empty-checkers");
    let cfg = write_config(&cfg_dir, "problem.kind = quantile\nproblem.alpha = 0.5\ncheckers =\n");
    let out_dir = temp_dir("empty-checkers-out");
    let out = rpavg(&["check", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr_text(&out).contains("empty checker selection"));
}

#[test]
fn unknown_checker_is_usage_error() {
    let cfg_dir = temp_dir("unknown-checker");
    let cfg = write_config(
        &cfg_dir,
        "problem.kind = quantile\nproblem.alpha = 0.5\ncheckers = h_phi, frobnicate\n",
    );
    let out_dir = temp_dir("unknown-checker-out");
    let out = rpavg(&["check", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr_text(&out).contains("frobnicate"), "stderr: {}", stderr_text(&out));
}

// --- lemmas command ------------------------------------------------------

#[test]
fn lemmas_prints_verified_table() {
    let out = rpavg(&["lemmas"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_text(&out));
    let text = stdout_text(&out);
    assert!(text.contains("shear-increment decay"));
    assert!(text.contains("contraction average"));
    assert!(text.contains("perturbed contraction"));
    assert!(text.contains("C* ="));
    assert!(!text.contains("BREACH"), "stdout: {text}");
}

// --- argument handling ---------------------------------------------------

#[test]
fn help_and_version_exit_zero() {
    let help = rpavg(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout_text(&help).contains("run"));
    assert_eq!(code(&rpavg(&["run", "--help"])), 0);
    assert_eq!(code(&rpavg(&["--version"])), 0);
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(code(&rpavg(&[])), 1, "missing subcommand");
    assert_eq!(code(&rpavg(&["frobnicate"])), 1, "unknown subcommand");
    assert_eq!(code(&rpavg(&["run", "--no-such-flag"])), 1, "unknown flag");
    assert_eq!(code(&rpavg(&["run"])), 1, "missing --config");
}

#[test]
fn missing_config_file_is_usage_error() {
    let out = rpavg(&["check", "--config", "/nonexistent/rpavg.conf", "--out", "/tmp"]);
    assert_eq!(code(&out), 1);
}

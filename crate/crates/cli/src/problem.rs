//! Builds benchmark problems from `problem.*` config keys.
//!
//! Matrix-valued keys accept either a comma-separated diagonal
//! (`problem.h = 1.5, 0.75`) or full rows separated by semicolons
//! (`problem.h = 1.5, 0.25; 0.25, 0.75`). Scalars are 1×1 matrices.

use nalgebra::DMatrix;
use rpavg_core::problems::{
    LeastSquaresProblem, LogGrowthProblem, LogisticProblem, Problem, QuantileProblem,
    DEFAULT_CACHE_SEED, DEFAULT_QUADRATURE_DRAWS,
};

use crate::config::Config;
use crate::error::CliError;

pub fn build_problem(cfg: &Config) -> Result<Box<dyn Problem>, CliError> {
    let kind = cfg.require("problem.kind")?.to_string();
    match kind.as_str() {
        "quantile" => {
            let alpha: f64 = cfg.require_parsed("problem.alpha")?;
            let mean: f64 = cfg.get_or("problem.mean", 0.0)?;
            let sd: f64 = cfg.get_or("problem.sd", 1.0)?;
            let p = QuantileProblem::normal(alpha, mean, sd)
                .map_err(|e| CliError::Usage(format!("problem.*: {e}")))?;
            Ok(Box::new(p))
        }
        "least_squares" => {
            let h = matrix_from_key(cfg, "problem.h")?
                .ok_or_else(|| CliError::Usage("missing required config key `problem.h`".into()))?;
            let d = h.nrows();
            let s0 = matrix_from_key(cfg, "problem.s0")?.unwrap_or_else(|| DMatrix::zeros(d, d));
            let theta_star = cfg
                .get_f64_list("problem.theta_star")?
                .unwrap_or_else(|| vec![0.0; d]);
            let p = LeastSquaresProblem::new(h, s0, theta_star)
                .map_err(|e| CliError::Usage(format!("problem.*: {e}")))?;
            Ok(Box::new(p))
        }
        "logistic" => {
            let theta_star = cfg.require_f64_list("problem.theta_star")?;
            let radius: f64 = cfg.require_parsed("problem.radius")?;
            if radius <= 0.0 || !radius.is_finite() {
                return Err(CliError::Usage(format!(
                    "config key `problem.radius`: must be a positive real, got {radius}"
                )));
            }
            if theta_star.is_empty() {
                return Err(CliError::Usage(
                    "config key `problem.theta_star`: must not be empty".into(),
                ));
            }
            let draws: usize = cfg.get_or("problem.quadrature_draws", DEFAULT_QUADRATURE_DRAWS)?;
            if draws < 2 {
                return Err(CliError::Usage(format!(
                    "config key `problem.quadrature_draws`: need at least 2, got {draws}"
                )));
            }
            let seed = cfg.get_u64_or("problem.cache_seed", DEFAULT_CACHE_SEED)?;
            Ok(Box::new(LogisticProblem::with_quadrature(
                theta_star, radius, draws, seed,
            )))
        }
        "log_growth" => Ok(Box::new(LogGrowthProblem::default())),
        other => Err(CliError::Usage(format!(
            "unknown problem.kind `{other}` (expected quantile, least_squares, logistic, or log_growth)"
        ))),
    }
}

/// Optional matrix key: diagonal list or semicolon-separated rows.
fn matrix_from_key(cfg: &Config, key: &str) -> Result<Option<DMatrix<f64>>, CliError> {
    let Some(raw) = cfg.get(key) else {
        return Ok(None);
    };
    let raw = raw.to_string();
    if raw.contains(';') {
        let rows: Vec<Vec<f64>> = cfg
            .get_vector_list(key)?
            .expect("key presence already checked");
        let n = rows.len();
        for row in &rows {
            if row.len() != n {
                return Err(CliError::Usage(format!(
                    "config key `{key}`: expected a square matrix, got a row of length {} in a {n}-row matrix",
                    row.len()
                )));
            }
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Some(DMatrix::from_row_slice(n, n, &flat)))
    } else {
        let diag = cfg.get_f64_list(key)?.expect("key presence already checked");
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, v) in diag.into_iter().enumerate() {
            m[(i, i)] = v;
        }
        Ok(Some(m))
    }
}

/// Converts a start point given in the problem's public coordinates into
/// the displacement-from-minimizer coordinates the engines work in.
pub fn displacement(problem: &dyn Problem, theta0_public: &[f64]) -> Result<Vec<f64>, CliError> {
    let star = problem.theta_star();
    if theta0_public.len() != star.len() {
        return Err(CliError::Usage(format!(
            "config key `run.theta0`: expected {} coordinates, got {}",
            star.len(),
            theta0_public.len()
        )));
    }
    Ok(theta0_public
        .iter()
        .zip(&star)
        .map(|(t, s)| t - s)
        .collect())
}

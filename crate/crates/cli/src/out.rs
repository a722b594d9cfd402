//! Output-directory plumbing shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Validates the output directory before any computation: creates it if
/// missing and, without `--overwrite`, refuses to clobber any file the
/// command is about to write.
pub fn prepare_out_dir(
    dir: &Path,
    files: &[String],
    overwrite: bool,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Usage(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    let paths: Vec<PathBuf> = files.iter().map(|f| dir.join(f)).collect();
    if !overwrite {
        for p in &paths {
            if p.exists() {
                return Err(CliError::Usage(format!(
                    "output file {} already exists; pass --overwrite to replace it",
                    p.display()
                )));
            }
        }
    }
    Ok(paths)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Usage(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

/// Rows of a matrix as JSON-ready nested vectors.
pub fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

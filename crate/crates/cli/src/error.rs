use std::fmt;

/// Errors surfaced to the shell.
///
/// `Usage` covers bad invocations and bad configs and exits 1; `Violation`
/// covers acceptance thresholds and assumption checks that the computation
/// itself found breached and exits 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Violation(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Violation(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

use std::fmt;

/// A failed command, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Inputs or configuration fail validation (exit 2).
    Validation(String),
    /// Estimation or output failed on valid inputs (exit 3).
    Estimation(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn estimation(msg: impl Into<String>) -> Self {
        CliError::Estimation(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Estimation(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Estimation(m) => write!(f, "estimation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Estimation(format!("i/o error: {e}"))
    }
}

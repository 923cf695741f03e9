use thiserror::Error;

/// Exit status for input and validation problems.
pub const EXIT_INVALID: u8 = 1;
/// Exit status when `verify` rejects a limit law.
pub const EXIT_REJECTED: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing required key `{key}` (flag --{flag})")]
    Missing { key: String, flag: String },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown key `{key}`; expected one of: {expected}")]
    UnknownKey { key: String, expected: String },
    #[error("config file {path}: {reason}")]
    ConfigFile { path: String, reason: String },
    #[error("{0}")]
    Library(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{rejected} of {total} tests rejected at level {level}")]
    Rejected { rejected: usize, total: usize, level: f64 },
}

impl CliError {
    pub fn missing(key: &str) -> Self {
        Self::Missing { key: key.to_string(), flag: key.rsplit('.').next().unwrap_or(key).to_string() }
    }

    pub fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::Invalid { key: key.to_string(), reason: reason.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Rejected { .. } => EXIT_REJECTED,
            _ => EXIT_INVALID,
        }
    }
}

/// Wraps a library error as a CLI error.
pub fn lib<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Library(e.to_string())
}

pub type Result<T> = std::result::Result<T, CliError>;

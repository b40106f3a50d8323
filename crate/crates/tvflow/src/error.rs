use std::io;
use std::path::Path;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or incomplete configuration, or unreadable inputs.
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(#[from] tvflow_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    /// An asserted inequality failed.
    #[error("assertion failed: {0}")]
    Assertion(String),
    /// A stored trajectory could not be read back.
    #[error("corrupt trajectory: {0}")]
    Corrupt(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) | CliError::Io { .. } => 2,
            CliError::Assertion(_) | CliError::Corrupt(_) => 3,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io {
            path: "csv output".into(),
            source: e.into(),
        }
    }
}

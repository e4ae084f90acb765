use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures surfaced by the command-line tool, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("identity check failed: {0}")]
    Identity(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Identity(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl From<tryinfo::Error> for CliError {
    fn from(e: tryinfo::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

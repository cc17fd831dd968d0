use thiserror::Error;

use invexopt::{ProblemError, RunError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("problem setup failed: {0}")]
    Problem(#[from] ProblemError),
    #[error("solver error: {0}")]
    Run(#[from] RunError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

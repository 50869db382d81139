use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] shuffledp::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Input {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn spec(msg: impl Into<String>) -> Self {
        CliError::Spec(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

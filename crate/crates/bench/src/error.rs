use std::path::PathBuf;

use slp_core::SlpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),

    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("no checkpoint for scheme {scheme} at {path}; run `train` first")]
    MissingCheckpoint { scheme: String, path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Core(#[from] SlpError),
}

pub type Result<T> = std::result::Result<T, BenchError>;

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for configuration problems, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Parse { .. } => 2,
            BenchError::MissingCheckpoint { .. } | BenchError::Io { .. } | BenchError::Csv { .. } => 4,
            BenchError::Core(SlpError::Io { .. }) => 4,
            BenchError::Core(_) => 2,
        }
    }
}

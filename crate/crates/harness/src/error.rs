use std::path::{Path, PathBuf};

use crate::config::ConfigError;
use crate::snapshot::SnapshotError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: schema mismatch: {message}", path.display())]
    Schema { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Snapshot { path: PathBuf, source: SnapshotError },

    #[error(transparent)]
    Core(#[from] otd_core::OtdError),

    #[error("{0}")]
    Usage(String),

    #[error("run failed: {0}")]
    Run(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn schema(path: &Path, message: &str) -> Self {
        Self::Schema {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    /// Process exit code: 2 for bad configuration or usage, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => 2,
            _ => 1,
        }
    }
}

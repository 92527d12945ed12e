use std::io;

use thiserror::Error;

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Core(#[from] bridger::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Report(String),
}

impl BenchError {
    pub fn config(msg: impl Into<String>) -> Self {
        BenchError::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        BenchError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Toml(_) => 2,
            BenchError::Core(bridger::Error::Invalid(_)) => 2,
            _ => 1,
        }
    }
}

/// Training failures that a sweep records per cell instead of aborting.
pub fn is_divergence(e: &bridger::Error) -> bool {
    use bridger::Error::*;
    matches!(
        e,
        Diverged { .. } | NanLoss { .. } | NonFiniteLoss { .. } | NonFiniteDrift { .. } | NonFiniteState { .. } | NonFiniteGradient(_)
    )
}

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] causal_posterior::Error),

    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// 2 for anything the caller can fix in the inputs, 4 when the sampler
    /// or a model could not be started, 1 for a replay mismatch.
    pub fn exit_code(&self) -> i32 {
        use causal_posterior::Error as E;
        match self {
            CliError::Core(E::Init(_) | E::SingularModel(_) | E::Cholesky(_) | E::DegenerateVariance(_)) => 4,
            CliError::ReplayMismatch(_) => 1,
            _ => 2,
        }
    }
}

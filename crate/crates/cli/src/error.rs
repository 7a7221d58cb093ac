use chd_core::ChdError;
use thiserror::Error;

use crate::ini::Origin;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error{}{}: {msg}", origin.map(|o| format!(" at {o}")).unwrap_or_default(), if key.is_empty() { String::new() } else { format!(" in `{key}`") })]
    Config { key: String, origin: Option<Origin>, msg: String },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: ChdError,
    },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn core(context: impl Into<String>, source: ChdError) -> Self {
        LabError::Core {
            context: context.into(),
            source,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 validation, 3 integration failure, 4 non-convergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } => 2,
            LabError::Core { source, .. } => match source {
                ChdError::Integration(_) => 3,
                ChdError::NonConvergence(_) => 4,
                ChdError::Io(_) | ChdError::Degenerate(_) | ChdError::OutOfRange { .. } => 1,
                _ => 2,
            },
            LabError::Verification(_) | LabError::Io { .. } => 1,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes. Stable across versions.
pub mod exit {
    pub const OK: i32 = 0;
    /// A verification criterion failed.
    pub const FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INVARIANT: i32 = 3;
    pub const BUDGET: i32 = 4;
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] arw_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    /// A run inside an ensemble failed; carries that run's exit code.
    #[error("{message}")]
    Aborted { message: String, code: i32 },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl LabError {
    pub fn usage(msg: impl Into<String>) -> Self {
        LabError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) | LabError::Config { .. } => exit::USAGE,
            LabError::Core(e) => core_exit_code(e),
            LabError::Aborted { code, .. } => *code,
            _ => exit::FAILED,
        }
    }
}

pub fn core_exit_code(e: &arw_core::Error) -> i32 {
    use arw_core::Error::*;
    match e {
        Parameter(_) => exit::USAGE,
        IllegalToppling { .. } | SiteOutOfRange { .. } | Invariant(_) => exit::INVARIANT,
        BudgetExceeded { .. } | CarpetBudgetExceeded { .. } => exit::BUDGET,
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the factorization library.
#[derive(Debug, Error)]
pub enum CmtfError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid problem: {0}")]
    Validation(String),

    #[error("matrix is not positive definite ({0})")]
    Singular(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("all {0} runs aborted; last error: {1}")]
    AllRunsAborted(usize, String),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),
}

impl CmtfError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CmtfError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// True for errors that come from the numerical solver rather than from
    /// malformed input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            CmtfError::Singular(_) | CmtfError::NonFinite(_) | CmtfError::AllRunsAborted(..)
        )
    }
}

pub type Result<T> = std::result::Result<T, CmtfError>;

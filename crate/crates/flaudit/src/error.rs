//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced by the auditing toolkit.
#[derive(Debug, Error)]
pub enum AuditError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate gradient: norm {norm:.3e} below {threshold:.0e}")]
    DegenerateGradient { norm: f64, threshold: f64 },

    #[error("client {0} has an empty dataset")]
    EmptyClient(u64),

    #[error("{path}:{line}: {msg}")]
    CsvFormat {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AuditError {
    /// Process exit code for the CLI: 2 for configuration/input errors,
    /// 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AuditError::Config(_)
            | AuditError::DimensionMismatch(_)
            | AuditError::CsvFormat { .. }
            | AuditError::EmptyClient(_) => 2,
            AuditError::Numerical(_) | AuditError::DegenerateGradient { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, AuditError>;

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the decomposition toolkit.
#[derive(Debug, Error)]
pub enum KmdError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, field {field}: {message}")]
    Parse {
        line: usize,
        field: usize,
        message: String,
    },

    #[error("bad header: {0}")]
    Header(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("need at least {needed} snapshots, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid mask: {0}")]
    Mask(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix has no positive singular values")]
    ZeroMatrix,

    #[error("singular value {index} of the truncation is zero")]
    ZeroSingularValue { index: usize },

    #[error("eigenvalue iteration did not converge for a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    #[error("invalid quadratic form: {0}")]
    InvalidForm(String),
}

pub type Result<T> = std::result::Result<T, KmdError>;

impl KmdError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KmdError::Io {
            path: path.into(),
            source,
        }
    }
}

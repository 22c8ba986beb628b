use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum QtnError {
    #[error("contraction mismatch: axis {a_axis} of left tensor has length {a_len}, axis {b_axis} of right tensor has length {b_len}")]
    ContractionMismatch {
        a_axis: usize,
        a_len: usize,
        b_axis: usize,
        b_len: usize,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid ansatz construction: {0}")]
    InvalidAnsatz(String),

    #[error("unsupported family for this operation: {0}")]
    UnsupportedFamily(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("reference resolution failed: {0}")]
    Reference(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QtnError>;

impl QtnError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        QtnError::Io {
            path: path.into(),
            source,
        }
    }
}

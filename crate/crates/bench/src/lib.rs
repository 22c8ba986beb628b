//! Experiment runner and reporting layer on top of the `qctn` library:
//! relative-energy-error sweeps over depth schedules with adaptive
//! initialization, power-law fits of the resulting curves, and spin
//! correlation profiles.

pub mod config;
pub mod correlate;
pub mod emit;
pub mod fit;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),

    #[error("reference resolution failed: {0}")]
    Reference(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] qctn::QtnError),

    #[error("fit error: {0}")]
    Fit(String),
}

impl BenchError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit category: 2 config, 3 reference, 4 i/o, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Reference(_) => 3,
            BenchError::Io { .. } => 4,
            BenchError::Core(qctn::QtnError::Reference(_)) => 3,
            BenchError::Core(qctn::QtnError::Io { .. }) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

//! Error type for the command line layer, with process exit codes.
//!
//! Exit code contract: 0 on success, 2 for input or configuration errors,
//! 3 for internal consistency failures (quantities that can only go wrong
//! if the computation itself is broken).

use thiserror::Error;

use geodiv_core::cluster::ClusterError;
use geodiv_core::info::InfoError;
use geodiv_core::informative::InformativeError;
use geodiv_core::interpret::InterpretError;
use geodiv_core::model::ModelError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: unknown area id {id:?}")]
    UnknownArea { path: String, id: String },
    #[error("{0}")]
    Config(String),
    #[error("internal consistency failure: {0}")]
    Consistency(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Informative(#[from] InformativeError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Interpret(#[from] InterpretError),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for bad input, 3 for violated internal invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Consistency(_) => 3,
            CliError::Info(InfoError::NegativeMeasure { .. }) => 3,
            CliError::Cluster(ClusterError::NegativeDiversity(_)) => 3,
            CliError::Cluster(ClusterError::Info(InfoError::NegativeMeasure { .. })) => 3,
            CliError::Informative(InformativeError::Info(InfoError::NegativeMeasure {
                ..
            })) => 3,
            _ => 2,
        }
    }
}

pub fn io_err(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

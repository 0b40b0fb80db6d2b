use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, solvers and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear system is not Hermitian positive definite")]
    NotPositiveDefinite,

    #[error("search space of {states} states exceeds the limit of {limit}")]
    SearchSpaceTooLarge { states: f64, limit: f64 },

    #[error("trial {trial}, scheme {scheme}, capacity {capacity_bps} bps: {source}")]
    Trial {
        trial: usize,
        scheme: String,
        capacity_bps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config key `{key}`: {message}")]
    ConfigKey { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

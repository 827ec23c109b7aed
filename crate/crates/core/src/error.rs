use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} = {value} lies outside [0, 1]")]
    Domain { what: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    NotOnSimplex(String),

    #[error("averaging window {window} is invalid for a trace of {len} rounds")]
    InvalidWindow { window: usize, len: usize },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("objective became non-finite at iteration {0}")]
    NonFiniteObjective(usize),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("refusing to overwrite {0} (pass the overwrite flag)")]
    WouldOverwrite(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    /// Short stable tag used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::Domain { .. } => "domain",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotOnSimplex(_) => "not_on_simplex",
            Error::InvalidWindow { .. } => "invalid_window",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NonFiniteObjective(_) => "non_finite_objective",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::WouldOverwrite(_) => "would_overwrite",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain { what, value })
    }
}

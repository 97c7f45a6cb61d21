use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite input `{0}`")]
    NonFinite(&'static str),

    #[error("time grid is empty")]
    EmptyTimeGrid,

    #[error("time grid must start at 0 and be strictly increasing")]
    TimeGridOrder,

    #[error("{quantity} = {value} lies outside its domain {domain}")]
    OutOfDomain {
        quantity: &'static str,
        value: f64,
        domain: String,
    },

    #[error("Reynolds number {0} violates the bound hypothesis Re > 1")]
    ReynoldsTooSmall(f64),

    #[error("background parameters A={a}, B={b} are not admissible: {reason}")]
    Inadmissible { a: f64, b: f64, reason: String },

    #[error("time step {dt} exceeds the stability limit {limit}")]
    Stability { dt: f64, limit: f64 },

    #[error("solver blew up at step {step} (t = {time}): {reason}")]
    BlowUp {
        step: usize,
        time: f64,
        reason: String,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trajectory record carries no Brownian increments")]
    MissingIncrements,

    #[error("horizon mismatch: expected {expected}, found {found}")]
    HorizonMismatch { expected: f64, found: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(name))
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {value}")))
    }
}

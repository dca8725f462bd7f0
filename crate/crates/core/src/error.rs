//! Error types shared across the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Engine-wide error. The CLI maps the variants onto exit codes:
/// config 1, data validation 2, topology 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or unusable input paths, detected before any
    /// stage runs.
    #[error("config error: {0}")]
    Config(String),

    /// Input data violates a declared invariant (bad sidecar, RLE run sums,
    /// score ranges, dimension mismatches, ...).
    #[error("data validation error: {0}")]
    Data(String),

    /// Output polygons violate topology guarantees. Always indicates an
    /// upstream bug; never repaired silently.
    #[error("topology error: {0}")]
    Topology(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn topology(msg: impl Into<String>) -> Self {
        Error::Topology(msg.into())
    }
}

//! Error type shared by every module in the crate.

use thiserror::Error;

/// Unified error for the benchmark toolkit.
///
/// The CLI maps these onto process exit codes: config errors exit 2,
/// data/IO errors exit 3, numeric errors exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible tensor or layer shapes.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// An argument outside its documented range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An operation invoked in the wrong order or state.
    #[error("state error: {0}")]
    State(String),

    /// Malformed or inconsistent dataset/cache/manifest contents.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A metric that is undefined for the requested setting.
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scatterer {index} at (azimuth {azimuth_m} m, range {range_m} m) lies outside the imaging grid")]
    OutOfGrid {
        index: usize,
        azimuth_m: f64,
        range_m: f64,
    },

    #[error("scatterers {first} and {second} snap to the same grid cell ({azimuth_index}, {range_index})")]
    DuplicateCell {
        first: usize,
        second: usize,
        azimuth_index: usize,
        range_index: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite sample at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

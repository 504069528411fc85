use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("improper system: {nv} complex variables < {ne} complex equations")]
    ImproperSystem { nv: usize, ne: usize },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular channel: {0}")]
    SingularChannel(String),

    #[error("non-finite cost {value} at iteration {iteration}")]
    NonFiniteCost { iteration: usize, value: f64 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input")]
    EmptyInput,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ImproperSystem { .. } => "ImproperSystem",
            Error::InvalidDimensions(_) => "InvalidDimensions",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::SingularChannel(_) => "SingularChannel",
            Error::NonFiniteCost { .. } => "NonFiniteCost",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::EmptyInput => "EmptyInput",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}

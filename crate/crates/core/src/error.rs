use std::path::PathBuf;

use crate::tensor::Shape;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: Shape, actual: Shape },

    #[error("data length {len} does not match shape {shape} ({expected} elements)")]
    LengthMismatch {
        shape: Shape,
        len: usize,
        expected: usize,
    },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("spatial size {size} is not divisible by 2^{depth} = {factor}")]
    Indivisible {
        size: usize,
        depth: usize,
        factor: usize,
    },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("trace error: {0}")]
    Trace(String),

    #[error("image format error at byte {offset}: {message}")]
    ImageFormat { offset: usize, message: String },

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("version mismatch: file has version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("corrupt blob: {0}")]
    Corrupt(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use thiserror::Error;

/// Errors raised by the kernel engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntkError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("domain mismatch: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("reality violation: imaginary residue {0:e}")]
    Reality(f64),
    #[error("non-finite kernel value at pair ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("singular system: factorization failed after jitter {0:e}")]
    Singular(f64),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

impl From<std::io::Error> for EntkError {
    fn from(e: std::io::Error) -> Self {
        EntkError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EntkError>;

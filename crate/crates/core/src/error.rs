use thiserror::Error;

/// Errors raised by the estimation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{d} features exceeds the enumeration cap of {cap}")]
    EnumerationCap { d: usize, cap: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("io error: {0}")]
    Io(String),
}

impl ShapError {
    /// True for failures of the numerical machinery rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, ShapError::Singular(_) | ShapError::NonFinite(_))
    }
}

impl From<std::io::Error> for ShapError {
    fn from(err: std::io::Error) -> Self {
        ShapError::Io(err.to_string())
    }
}

impl From<csv::Error> for ShapError {
    fn from(err: csv::Error) -> Self {
        ShapError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ShapError>;

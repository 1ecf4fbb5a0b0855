use thiserror::Error;

/// Errors raised by the numerical core and the job runner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HlsError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("exponent error: {0}")]
    Exponent(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Every validation problem found in a config, reported together.
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HlsError {
    fn from(err: std::io::Error) -> Self {
        HlsError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HlsError>;

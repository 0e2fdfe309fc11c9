use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum MispError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("numeric error: {0}")]
    NonFinite(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: zero-norm vector(s) for ids [{}]", .ids.join(", "))]
    Degenerate { ids: Vec<String> },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged at {stage} {index}: non-finite loss")]
    Diverged { stage: &'static str, index: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MispError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        MispError::Dimension(msg.into())
    }

    /// Broad category, used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            MispError::Config(_) => ErrorKind::Config,
            MispError::Diverged { .. } | MispError::NonFinite(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

pub type Result<T> = std::result::Result<T, MispError>;

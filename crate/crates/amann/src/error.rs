use crate::memory::Rule;
use crate::pattern::Variant;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rule {rule} is not supported for {variant} patterns")]
    UnsupportedRule { rule: Rule, variant: Variant },

    /// A file failed structural validation. `offset` is the byte position at
    /// which the problem was detected.
    #[error("{path}: byte {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by malformed or unreadable input data, as
    /// opposed to bad parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Format { .. } | Error::Io(_))
    }
}

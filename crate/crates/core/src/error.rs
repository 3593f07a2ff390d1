use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum DsmError {
    #[error("empty vocabulary (min_count = {min_count})")]
    EmptyVocabulary { min_count: u64 },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset `{0}` has no covered items")]
    NoCoverage(String),

    #[error("insufficient data: need at least {needed}, got {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("correlation is undefined for a constant sequence")]
    ConstantInput,

    #[error("all paired differences are zero")]
    AllZeroDifferences,

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DsmError> = std::result::Result<T, E>;

impl DsmError {
    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        DsmError::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}

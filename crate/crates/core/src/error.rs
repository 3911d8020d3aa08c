use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed span: start {start} must be less than end {end}")]
    MalformedSpan { start: usize, end: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("brute-force state space too large: {states} configurations exceed limit {limit}")]
    OracleTooLarge { states: u128, limit: u128 },

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("{0} violates the non-overlap constraint")]
    InvalidAssignment(&'static str),

    #[error("example has no gold assignment")]
    MissingGold,

    #[error("surface '{surface}' has no lexicon entry for entity '{entity}'")]
    MissingLexiconEntry { surface: String, entity: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("keying mismatch: {0}")]
    Keying(String),

    #[error("unsupported model file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use std::path::PathBuf;

/// Errors produced anywhere in the embedding, training, and evaluation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A numeric computation produced non-finite values or failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A documented precondition of an operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Rank-deficient input to an orthogonalization.
    #[error("rank-deficient input: column {column} has no independent component")]
    Degenerate { column: usize },

    /// A data file could not be parsed.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// An entity or relation name could not be resolved.
    #[error("vocabulary error: {0}")]
    Vocab(String),

    /// An entity or relation id is out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// Invalid model or run configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The evaluation protocol was violated (empty split, filtered target, …).
    #[error("evaluation protocol violated: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

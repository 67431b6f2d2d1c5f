//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("duplicate post id: {0}")]
    DuplicateId(String),

    #[error("post {id}: embedding dimension {got} does not match corpus dimension {expected}")]
    EmbeddingDim {
        id: String,
        got: usize,
        expected: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("post {id}: missing {what}")]
    MissingField { id: String, what: String },

    #[error("audio error: {0}")]
    Audio(String),

    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("could not parse annotation response: {raw:?}")]
    AnnotationParse { raw: String },

    #[error("annotation endpoint error: {0}")]
    Endpoint(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::value::ValueKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document on line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("conflicting types at {path}: schema has {expected}, document has {found}")]
    MixedType {
        path: String,
        expected: String,
        found: String,
    },

    #[error("sample does not match schema at {path}: {reason}")]
    SchemaMismatch { path: String, reason: String },

    #[error("value of kind {found:?} cannot be encoded by a {expected} encoder")]
    KindMismatch {
        expected: &'static str,
        found: ValueKind,
    },

    #[error("schema node at {0} has no statistics to sample from")]
    EmptyStats(String),

    #[error("concept needs {needed} distinct atomic paths but the schema has {available}")]
    InsufficientPaths { needed: usize, available: usize },

    #[error("negative sample repair did not converge after {0} attempts")]
    GenerationStall(usize),

    #[error("full-sample confidence {confidence:.4} is below the threshold {tau:.4}")]
    InconsistentInput { confidence: f64, tau: f64 },

    #[error("subset selection exhausted its candidates without reaching the threshold")]
    Unreachable,

    #[error("invalid method spec {spec:?}: {reason}")]
    InvalidMethod { spec: String, reason: String },

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

use crate::protocol::ProtocolError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid bit string: {0}")]
    InvalidBits(String),

    #[error("invalid noise parameter: {0}")]
    InvalidNoise(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("invalid probability {0}: must lie in (0, 1)")]
    InvalidProbability(f64),

    #[error("label set is empty")]
    EmptyLabelSet,

    #[error("label {label} out of range for {num_labels} labels")]
    LabelOutOfRange { label: u32, num_labels: usize },

    #[error("enumeration limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("worst-case construction requires {0}")]
    SideCondition(&'static str),

    #[error("base classifier failed at sample {index}: {source}")]
    Classifier {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Protocol(#[from] ProtocolError),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("unknown classifier `{0}`")]
    UnknownClassifier(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

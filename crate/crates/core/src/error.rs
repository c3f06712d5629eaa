use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },
    #[error("timestamps must be strictly increasing (index {index})")]
    NonIncreasingTime { index: usize },
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
    #[error("time {t} outside curve span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("degenerate chord: current point and end point coincide")]
    DegenerateChord,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid grid configuration: {0}")]
    InvalidGrid(String),
    #[error("invalid reference line `{id}`: {reason}")]
    InvalidLine { id: String, reason: String },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("missing weight for agent type `{0}`")]
    MissingWeight(String),
    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }
}

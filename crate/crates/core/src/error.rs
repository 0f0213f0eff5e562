use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("io error: {0}")]
    Stream(#[from] std::io::Error),
    #[error("duplicate {kind} label `{label}`")]
    DuplicateLabel { kind: &'static str, label: String },
    #[error("vocabulary has no {0} labels")]
    EmptyVocabulary(&'static str),
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("ground-truth sequence is empty")]
    EmptyTruth,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("expected exactly {expected} candidate sequences, got {got}")]
    CandidateCount { expected: usize, got: usize },
    #[error("candidate {index} has length {got}, expected {expected}")]
    CandidateLength {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("group needs at least 2 samples, got {0}")]
    GroupTooSmall(usize),
    #[error("emission symbol {0} is outside the policy alphabet")]
    UnknownEmission(usize),
    #[error("invalid emission sequence: {0}")]
    InvalidEmissions(String),
    #[error("all class counts are zero")]
    AllZeroCounts,
    #[error("score grid is empty")]
    EmptyGrid,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid edit task: {0}")]
    InvalidEdit(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("empty stream: {0}")]
    EmptyStream(String),
    #[error("missing cached old-policy log-probs; replay the rollout before computing the loss")]
    MissingOldLogprobs,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("incomplete report: missing {0}")]
    IncompleteReport(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("failed to parse {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

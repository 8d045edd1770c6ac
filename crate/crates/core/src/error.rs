use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The site law violates a normalization (weights, probability vectors, parameter ranges).
    #[error("malformed site law: {0}")]
    Malformed(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource cap exceeded: {0}")]
    Resource(String),

    #[error("no positive root: {0}")]
    NoRoot(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    /// The requested experiment predicts an event too rare to observe.
    #[error("infeasible experiment: predicted probability {predicted:e} below {floor:e}")]
    Infeasible { predicted: f64, floor: f64 },

    #[error("refused: {0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

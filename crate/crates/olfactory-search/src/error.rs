use thiserror::Error;

/// Errors produced by the solver suite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("action {action} is invalid at cell ({x}, {y})")]
    InvalidAction {
        action: &'static str,
        x: usize,
        y: usize,
    },

    #[error("observation has zero likelihood under the current belief")]
    ImpossibleObservation,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("malformed artifact: {0}")]
    Artifact(String),

    #[error("policy was solved for case fingerprint {artifact} but evaluation case has fingerprint {case}")]
    FingerprintMismatch { artifact: String, case: String },

    #[error("unknown case '{0}'")]
    UnknownCase(String),

    #[error("unknown policy '{0}'")]
    UnknownPolicy(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

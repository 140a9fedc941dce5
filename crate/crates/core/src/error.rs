use thiserror::Error;

/// Errors produced by the tomography library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid readout physics: {0}")]
    InvalidPhysics(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("truncation bound exceeded hard cap {cap} (tail mass still {tail:e})")]
    TruncationCap { cap: usize, tail: f64 },

    #[error("degenerate readout channel: eps10 + eps01 = {0} >= 1")]
    DegenerateChannel(f64),

    #[error("dataset does not match measurement model: {0}")]
    DataMismatch(String),

    #[error("protocol is informationally incomplete: {null_directions} null direction(s) in the tangent space: {detail}")]
    InformationallyIncomplete { null_directions: usize, detail: String },

    #[error("loss distribution could not be resolved with {points} grid points: {detail}")]
    Resolution { points: usize, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("check failed: {0}")]
    CheckViolation(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

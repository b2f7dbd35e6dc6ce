use thiserror::Error;

/// Errors raised by the library. Integration aborts are reported separately by
/// [`crate::flow::FlowAbort`] because they carry a partial trajectory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("assumption failed: {0}")]
    AssumptionFailed(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid path ({axiom}): {detail}")]
    InvalidPath { axiom: &'static str, detail: String },

    #[error("generation failed after {attempts} attempts: {detail}")]
    GenerationFailed { attempts: usize, detail: String },

    #[error("format error at byte {offset}: {detail}")]
    Format { offset: u64, detail: String },

    #[error("content error: {0}")]
    Content(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("integration aborted at t={t}: {reason}")]
    IntegrationAborted { t: f64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

use crate::nnls::NnlsSolution;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The active-set iteration hit its safety cap. Carries the feasible
    /// iterate reached so far.
    #[error("NNLS exceeded {iterations} outer iterations")]
    IterationCap {
        iterations: usize,
        best: Box<NnlsSolution>,
    },

    #[error("kernel family does not provide parameter gradients")]
    GradientUnavailable,

    #[error("unsupported schema version {found} (expected major {expected})")]
    SchemaVersion { found: String, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

/// Error type shared across the crate.
///
/// `Parse` and `InvalidScenario` describe bad user input (configs, data
/// files, CLI values); the CLI maps those to exit code 2. Everything else is
/// an internal or I/O failure and maps to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum LcError {
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {0} exceeds the 2^D corner-expansion cap of {max}", max = crate::dmvn::BINARY_DIM_CAP)]
    DimensionCap(usize),

    #[error("numerical inconsistency: {0}")]
    Numeric(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("posterior undefined: zero marginal probability at {0:?}")]
    UndefinedPosterior(Vec<i64>),

    #[error("unknown label {0}")]
    UnknownLabel(usize),

    #[error("{path}: parse error at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    Diverged { epoch: u32, batch: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LcError>;

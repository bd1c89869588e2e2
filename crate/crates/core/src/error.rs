use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("zero-norm feature vector")]
    ZeroNorm,

    #[error("non-positive depth {value} at index {index}")]
    NonPositiveDepth { index: usize, value: f64 },

    #[error("degenerate box ({x1}, {y1}, {x2}, {y2})")]
    DegenerateBox { x1: f64, y1: f64, x2: f64, y2: f64 },

    #[error("cost matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix side {side} exceeds the limit of {max}")]
    TooLarge { side: usize, max: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("need at least {needed} rows, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },

    #[error("model error: {0}")]
    Model(String),

    #[error("perturbation not applicable: {0}")]
    Perturbation(String),

    #[error("{unmatched} of {total} ids have no score row (first: {})", ids.first().map(String::as_str).unwrap_or(""))]
    Unmatched {
        unmatched: usize,
        total: usize,
        ids: Vec<String>,
    },

    #[error("{}: field `{field}`: {message}", file.display())]
    Bundle {
        file: PathBuf,
        field: String,
        message: String,
    },

    #[error("{}:{line}: {message}", file.display())]
    Schema {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status: 1 for bad input, 2 for model problems,
    /// 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Model(_) | Error::Diverged { .. } => 2,
            Error::NotSquare { .. } | Error::TooLarge { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn bundle(
        file: impl Into<PathBuf>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Bundle {
            file: file.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}

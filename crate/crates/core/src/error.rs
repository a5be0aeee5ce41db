use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
///
/// The CLI maps each variant onto an exit code through [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("rank error in {op}: expected {expected}, got shape {shape:?}")]
    Rank {
        op: &'static str,
        expected: &'static str,
        shape: Vec<usize>,
    },

    #[error("word id {id} is outside a vocabulary of {vocab} entries")]
    OutOfVocabulary { id: usize, vocab: usize },

    #[error("condensation schedule mismatch at hop {hop}: expected {expected:?}, got {got:?}")]
    Schedule {
        hop: usize,
        expected: (usize, usize),
        got: Vec<usize>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{}:{line}: malformed line: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: schema error: {message}", path.display())]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-deterministic graph builder: {0}")]
    Determinism(String),

    #[error("non-finite loss at batch {batch}; parameter norms: {diagnostics}")]
    NonFinite { batch: usize, diagnostics: String },

    #[error("gradient check failed: max relative error {max_rel_error:e} exceeds {tolerance:e}")]
    GradCheck { max_rel_error: f64, tolerance: f64 },

    #[error("checkpoint parameter `{param}`: {message}")]
    CheckpointParam { param: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data/config, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) => 1,
            Error::NonFinite { .. } | Error::GradCheck { .. } | Error::Determinism(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

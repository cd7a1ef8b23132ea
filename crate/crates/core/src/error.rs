use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A row of an input file could not be parsed.
    #[error("{}:{line}: {msg}", file.display())]
    Parse {
        file: PathBuf,
        line: u64,
        msg: String,
    },

    /// Well-formed input that violates a data invariant (duplicates, unknown ids, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Input for which a normalizer or estimator is undefined (all-zero volume, no prices, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("singular regression: {0}")]
    SingularRegression(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient tail: need at least {needed} points, have {got}")]
    InsufficientTail { needed: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("validation mismatch: {0}")]
    Mismatch(String),

    #[error("{}: {error}", path.display())]
    Io { path: PathBuf, error: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn parse(file: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, error: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            error,
        }
    }
}

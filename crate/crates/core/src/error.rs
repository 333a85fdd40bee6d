use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants carry enough context to be actionable
/// from the CLI without a backtrace.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid node set: {0}")]
    InvalidNodeSet(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("shape mismatch: {0}")]
    ShapeError(String),

    #[error("graph {0} has no label")]
    MissingLabel(String),

    #[error("budget out of range: {0}")]
    BudgetError(String),

    #[error("brute-force oracle instance too large: {0} candidate assignments (cap {1})")]
    OracleTooLarge(u128, u128),

    #[error("no qualified counterpart for graph {0}")]
    NoQualifiedCounterpart(String),

    #[error("graph {0} has no edges to take saliency over")]
    EmptySaliency(String),

    #[error("accuracy curve is empty")]
    EmptyCurve,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("recall undefined: ground-truth node set is empty")]
    UndefinedRecall,

    #[error("reference set was scored against a different model")]
    ModelMismatch,

    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),

    #[error("parse error: {0}")]
    ParseError(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

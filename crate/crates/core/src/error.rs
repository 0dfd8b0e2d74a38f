use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate preference: no positive weight left after clamping")]
    DegeneratePreference,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dataset has no constrained objectives to augment")]
    NothingToAugment,

    #[error("dataset is already augmented")]
    AlreadyAugmented,

    #[error("no safe trajectory satisfies threshold {0:?}")]
    InfeasibleTarget(Vec<f64>),

    #[error("dataset is missing behavioral-preference labels")]
    MissingLabels,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("operation `{op}` is not supported by {kind} bundles")]
    Unsupported { op: &'static str, kind: &'static str },

    #[error("{what} id {id} out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        id: usize,
        limit: usize,
    },

    #[error("adaptation diverged: {0} consecutive non-finite iterations")]
    Divergence(usize),

    #[error("unknown environment id {0:?}")]
    UnknownEnv(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

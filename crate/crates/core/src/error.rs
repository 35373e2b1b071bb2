use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown label `{0}`: not an NSL-KDD attack and not `normal`")]
    UnknownLabel(String),

    #[error("label `{label}` needs {requested} records but only {available} are available (short by {})", requested - available)]
    Shortfall {
        label: String,
        requested: usize,
        available: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("distribution has no positive mass")]
    EmptyDistribution,

    #[error("feature {0} is not discrete; discretize the dataset first")]
    NotDiscrete(usize),

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

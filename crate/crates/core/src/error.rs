use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("rejection sampler exceeded {0} attempts")]
    RejectionBudget(usize),

    #[error("could not draw linearly independent index vectors within {0} attempts")]
    ResampleBudget(usize),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty search space: bound {0} < 1 leaves no vector with first coordinate 1")]
    EmptySearchSpace(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("every lattice bin is empty")]
    AllBinsEmpty,

    #[error("horizon {horizon} too short: need more than {needed}")]
    HorizonTooShort { horizon: usize, needed: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("unsupported schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

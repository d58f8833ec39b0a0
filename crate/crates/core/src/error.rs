use thiserror::Error;

use crate::methods::MethodId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("series has zero variance")]
    DegenerateSeries,

    #[error("simulation produced a non-finite value (series {index})")]
    NonFiniteSimulation { index: usize },

    #[error("method {method} failed: {reason}")]
    MethodFailed { method: MethodId, reason: String },

    #[error("scaling denominator is zero (constant or perfectly seasonal history)")]
    ZeroDenominator,

    #[error("member forecasts disagree on level or horizon")]
    LevelMismatch,

    #[error("design matrix is singular")]
    SingularDesign,

    #[error("feature registry mismatch: model expects {expected}, got {found}")]
    RegistryMismatch { expected: String, found: String },

    #[error("unknown feature: {0}")]
    UnknownFeature(String),

    #[error("ids do not align: {0:?}")]
    IdMismatch(Vec<String>),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{failed} of {total} {frequency} series failed during training")]
    SystemicFailure {
        frequency: String,
        failed: usize,
        total: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by malformed or unsuitable input data rather than misuse.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::SystemicFailure { .. })
    }
}

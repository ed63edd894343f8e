use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("score evaluated at x = {x}, which is not inside the open support ({lower}, {upper})")]
    Domain { x: f64, lower: f64, upper: f64 },

    #[error("score domain error at coordinate {index} (x = {x})")]
    DomainAt { index: usize, x: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("input has zero norm")]
    ZeroNorm,

    #[error("cannot parse distribution spec `{0}` (expected e.g. gaussian:0,1 | gamma:5,1 | t:5 | rayleigh:2)")]
    DistSpec(String),

    #[error("custom model `{0}` has no sampler")]
    NoSampler(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}

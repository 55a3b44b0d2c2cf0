use thiserror::Error;

/// Errors produced by the geometry, energy, and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown built-in geometry `{0}`")]
    UnknownGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("Riesz exponent s = {0} must be positive and finite")]
    InvalidExponent(f64),

    #[error("s = {s} is outside the admissible range {range}")]
    ExponentOutOfRange { s: f64, range: String },

    #[error("singular configuration: points {i} and {j} are {distance:e} apart")]
    SingularConfiguration { i: usize, j: usize, distance: f64 },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("no nodes left in the support after the weight-quantile filter")]
    EmptySupport,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_exponent(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(s))
    }
}

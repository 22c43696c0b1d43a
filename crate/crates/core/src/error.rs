use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite input in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("constants required: {0}")]
    ConstantsRequired(String),

    #[error("ReCU pre-activation {value:e} in layer {layer} exceeds the validity envelope of {envelope:e}")]
    RecuEnvelope {
        layer: usize,
        value: f64,
        envelope: f64,
    },

    #[error("non-finite intermediate at index path {path}")]
    NonFiniteAt { path: String },

    #[error("oracle not applicable: {0}")]
    OracleNotApplicable(String),

    #[error("query outside the safe interior: {0}")]
    OutOfDomain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("network format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

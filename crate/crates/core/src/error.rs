use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("state is not normalized (norm² = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("occupation {occupation} exceeds cutoff {cutoff}")]
    CutoffExceeded { occupation: u8, cutoff: u8 },

    #[error("mode index {index} out of range for {mode_count} modes")]
    ModeOutOfRange { index: usize, mode_count: usize },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("numerical contract violated: {0}")]
    ContractViolation(String),

    #[error("division by zero in {0}")]
    ZeroDenominator(&'static str),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("time-tag format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(())
}

use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel table does not cover offset {offset:?}")]
    MissingOffset { offset: Vec<i64> },

    #[error("not at threshold coupling: nearest Birman-Schwinger eigenvalue is {nearest} (distance {distance:e} from -1)")]
    NotAtThreshold { nearest: String, distance: f64 },

    #[error("eigenvalue or resonance at z: smallest singular value {sigma_min:e}")]
    Singular { sigma_min: f64 },

    #[error("leading term vanishes (source sum is zero); use decay_fit")]
    LeadingTermVanishes,

    #[error("empty shells in range [{r1}, {r2}]")]
    EmptyShells { r1: f64, r2: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}

use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance accumulator is empty")]
    EmptyAccumulator,

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix or sample data contains non-finite values")]
    NonFinite,

    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("covariance is numerically singular (lambda_min {lambda_min:e})")]
    SingularCovariance { lambda_min: f64 },

    #[error("signal has zero power; SNR is undefined")]
    ZeroPower,

    #[error("eigenvalue spectrum is all zero")]
    ZeroSpectrum,

    #[error("insufficient calibration trials: need at least {needed}, got {got}")]
    InsufficientTrials { needed: usize, got: usize },

    #[error("feature not learned: similarity {similarity:.4} <= threshold {threshold:.4}")]
    NotLearned { similarity: f64, threshold: f64 },

    #[error("truncated header")]
    TruncatedHeader,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated payload: header declares {declared} values, file holds {available}")]
    TruncatedPayload { declared: u64, available: u64 },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("invalid file contents: {0}")]
    InvalidData(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit status for the command-line tool: 2 for invalid input,
    /// 3 when a feature was not learned, 4 for file and I/O problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::InsufficientSamples { .. }
            | Error::DimensionMismatch { .. }
            | Error::InsufficientTrials { .. }
            | Error::UnknownKey(_) => 2,
            Error::NotLearned { .. } => 3,
            Error::Io(_)
            | Error::TruncatedHeader
            | Error::BadMagic { .. }
            | Error::VersionMismatch { .. }
            | Error::TruncatedPayload { .. }
            | Error::TrailingBytes(_)
            | Error::InvalidData(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

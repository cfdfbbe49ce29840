use std::io;

use thiserror::Error;

use crate::Variable;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("no equilibrium angle: mean mechanical power {p_m_mean} must be below p_max {p_max}")]
    NoEquilibrium { p_m_mean: f64, p_max: f64 },

    #[error("integration diverged at step {step}{}", realization.map(|r| format!(" of realization {r}")).unwrap_or_default())]
    IntegrationDiverged {
        realization: Option<usize>,
        step: usize,
    },

    #[error("index out of range: {variable:?} at time index {time_index} (last valid index {max_index})")]
    IndexOutOfRange {
        variable: Variable,
        time_index: usize,
        max_index: usize,
    },

    #[error("duplicate index entry: {variable:?} at time index {time_index}")]
    DuplicateIndex { variable: Variable, time_index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("prior covariance is not positive definite even with nugget {max_nugget:e}")]
    SingularPrior { max_nugget: f64 },

    #[error("posterior variance {value:e} is negative beyond tolerance {tolerance:e}")]
    NegativePosteriorVariance { value: f64, tolerance: f64 },

    #[error("hyperparameter fit failed: {0}")]
    FitFailed(String),

    #[error("forecast does not align with the truth grid: {0}")]
    AlignmentError(String),

    #[error("truth realization leaks into the prior: {0}")]
    TruthLeak(String),

    #[error("unsupported ensemble file format version {found} (reader supports major {supported})")]
    FormatVersionMismatch { found: u16, supported: u16 },

    #[error("ensemble file checksum mismatch")]
    ChecksumMismatch,

    #[error("malformed ensemble file: {0}")]
    BadFormat(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit status for the command-line front end: 2 for
    /// configuration and input problems, 3 for simulation failures, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_)
            | Error::NoEquilibrium { .. }
            | Error::TruthLeak(_)
            | Error::FormatVersionMismatch { .. }
            | Error::ChecksumMismatch
            | Error::BadFormat(_)
            | Error::Config(_)
            | Error::Io(_) => 2,
            Error::IntegrationDiverged { .. } => 3,
            Error::IndexOutOfRange { .. }
            | Error::DuplicateIndex { .. }
            | Error::DimensionMismatch(_)
            | Error::SingularPrior { .. }
            | Error::NegativePosteriorVariance { .. }
            | Error::FitFailed(_)
            | Error::AlignmentError(_) => 4,
        }
    }
}

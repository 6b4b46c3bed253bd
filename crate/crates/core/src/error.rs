use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure category, mapped onto process exit codes by the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Numerical,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorCategory::Validation => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::Io => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch at {matrix}({step}): expected {expected}, found {found}")]
    DimensionMismatch {
        matrix: String,
        step: usize,
        expected: String,
        found: String,
    },

    #[error("non-finite entry in {matrix}({step})")]
    NonFinite { matrix: String, step: usize },

    #[error("horizon must be at least one step")]
    EmptyHorizon,

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid step range: start {start} > end {end} (horizon {horizon})")]
    InvalidStepRange {
        start: usize,
        end: usize,
        horizon: usize,
    },

    #[error("incompatible systems: {0}")]
    Incompatible(String),

    #[error("brute-force principal angles need ambient dimension <= 3, got {0}")]
    AmbientTooLarge(usize),

    #[error("orthonormalization lost rank at column {0}")]
    RankLoss(usize),

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("guest trajectory is not admissible: residual {residual:e} exceeds {bound:e}")]
    InadmissibleExperience { residual: f64, bound: f64 },

    #[error("similarity report does not match the given decompositions ({0})")]
    MismatchedReport(&'static str),

    #[error(
        "behaviors are not similar (residual {residual:e}); transfer needs an explicit override"
    )]
    NotSimilar { residual: f64 },

    #[error("learning gain {gamma} is outside (0, {bound}) and would diverge")]
    DivergentGain { gamma: f64, bound: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scenario {0}")]
    Scenario(String),

    #[error("unknown system: {0}")]
    UnknownSystem(String),

    #[error("unknown reference: {0}")]
    UnknownReference(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } | Error::Csv { .. } => ErrorCategory::Io,
            Error::RankLoss(_)
            | Error::NoConvergence(_)
            | Error::InadmissibleExperience { .. }
            | Error::NotSimilar { .. } => ErrorCategory::Numerical,
            _ => ErrorCategory::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                what,
                expected,
                found,
            })
        }
    }
}

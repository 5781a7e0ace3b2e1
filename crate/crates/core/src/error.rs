use std::fmt;

use crate::pcf::Word;

/// What made a resolvent guard trip.
#[derive(Debug, Clone, PartialEq)]
pub enum Culprit {
    /// A cell whose rescaled parameter sits on the Dirichlet spectrum.
    Word(Word),
    /// Nearest eigenvalue of a discrete operator.
    Eigenvalue(f64),
}

impl fmt::Display for Culprit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Culprit::Word(w) => write!(f, "cell word {w}"),
            Culprit::Eigenvalue(e) => write!(f, "nearest eigenvalue {e:.12e}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown preset {0:?} (expected interval, sg or sg3)")]
    NotAPreset(String),
    #[error("invalid fractal spec at `{path}`: {reason}")]
    Spec { path: String, reason: String },
    #[error("singular resolvent at lambda = {lambda}: {culprit}")]
    SingularResolvent { lambda: f64, culprit: Culprit },
    #[error("prekernel matrix B is singular at lambda = {lambda} (condition {condition:.3e})")]
    SingularPrekernel { lambda: f64, condition: f64 },
    #[error("lambda = {lambda} is (numerically) a Neumann eigenvalue (condition {condition:.3e})")]
    SingularNeumann { lambda: f64, condition: f64 },
    #[error("forbidden value {value} reached at level {level}")]
    ForbiddenValue { level: usize, value: f64 },
    #[error("{what} did not converge by level {level} (last iterates {last:?})")]
    NonConvergent {
        what: String,
        level: usize,
        last: (f64, f64),
    },
    #[error("unsupported address: {0}")]
    UnsupportedAddress(String),
    #[error("lambda = {lambda} lies on the spectrum")]
    OnSpectrum { lambda: f64 },
    #[error("dense problem of size {size} exceeds the cap {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Spec {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("division by an interval containing zero: [{lo}, {hi}]")]
    DivisionByZero { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("map is tangent (|eps - 1| = {gap:e}); branch structure is ill-defined")]
    Tangency { gap: f64 },

    #[error("missing {norm} norm required by {lemma}")]
    MissingNorm { lemma: &'static str, norm: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no certificate at N = {n}: {reason}; refine the partition")]
    NoCertificate { n: usize, reason: String },

    #[error("certificate does not match the request: {0}")]
    IncompatibleCertificate(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

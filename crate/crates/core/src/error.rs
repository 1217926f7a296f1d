use thiserror::Error;

use crate::integrators::SchemeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode index (ell={ell}, m={m}): |m| must not exceed ell")]
    InvalidMode { ell: u32, m: i64 },

    #[error("spectrum has {len} amplitudes but degree {ell} was requested")]
    SpectrumTooShort { len: usize, ell: u32 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("scheme {scheme:?} is not supported for the {equation} equation")]
    UnsupportedScheme {
        scheme: SchemeId,
        equation: &'static str,
    },

    #[error("no closed-form trace formula for {0}; use the moment recursion")]
    NoClosedForm(String),

    #[error("{0}")]
    Usage(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("accumulator time grids differ ({0} vs {1} points)")]
    GridMismatch(usize, usize),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
}

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

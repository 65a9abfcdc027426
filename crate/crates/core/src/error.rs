use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate margin: CDF of coordinate {coordinate} equals 1 at row {row}")]
    DegenerateMargin { coordinate: usize, row: usize },

    #[error("insufficient data: need at least {needed}, got {got} ({context})")]
    InsufficientData {
        needed: usize,
        got: usize,
        context: &'static str,
    },

    #[error("insufficient tail: {found} conditioning exceedances, need at least {needed}")]
    InsufficientTail { found: usize, needed: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{scheme} partition does not support dimension {d}")]
    UnsupportedDimension { scheme: &'static str, d: usize },

    #[error("root finder did not converge after {iterations} iterations at u1={u1}, v={v}")]
    RootNotFound { u1: f64, v: f64, iterations: usize },

    #[error("target {target} is not attainable; attainable range is ({low}, {high})")]
    Unattainable { target: f64, low: f64, high: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("rejected input: {malformed} of {total} rows malformed (first problem: {first})")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        first: String,
    },

    #[error("no output: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of numerical routines (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::RootNotFound { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

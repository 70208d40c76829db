use thiserror::Error;

/// Errors raised across the crate. Variants carry enough context to tell a
/// caller bug (mismatched preconditions) from bad user input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("window mismatch between path sets")]
    WindowMismatch,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("splice precondition violated: {0}")]
    SpliceMismatch(String),
    #[error("paths have disjoint time domains")]
    DisjointDomains,
    #[error("invalid knots: {0}")]
    InvalidKnots(String),
    #[error("site ({x}, {t}) has wrong parity for {what}")]
    Parity { x: i64, t: i64, what: &'static str },
    #[error("site ({x}, {t}) lies outside the window")]
    OutsideWindow { x: i64, t: i64 },
    #[error("site ({x}, {t}) has no history below it in the window")]
    NoHistory { x: i64, t: i64 },
    #[error("invalid point type ({m_in}, {m_out})")]
    InvalidPointType { m_in: u32, m_out: u32 },
    #[error("splice candidates do not match point type: {0}")]
    CandidateMismatch(String),
    #[error("splice candidates cross each other")]
    CandidatesCross,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("covariance factorization failed: {0}")]
    Factorization(String),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

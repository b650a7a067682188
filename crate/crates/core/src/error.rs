use thiserror::Error;

/// Crate-wide error type.
///
/// `Domain` marks violated preconditions on caller input, `Internal` marks
/// broken invariants that indicate a bug or corrupted state, and the
/// remaining variants carry structured outcomes that callers may want to
/// match on (a failed enclosure refinement, a missing scaling factor, a
/// period too small to support any covering fraction).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("enclosure refinement failed: width {achieved} above target {target} after {iterations} iterations")]
    Refinement {
        achieved: String,
        target: String,
        iterations: u32,
    },

    #[error("no admissible scaling factor in [{lower}, {upper}]")]
    NoScalingFactor { lower: String, upper: String },

    #[error("period {period} too small for target range (needs at least twice the range top {bound})")]
    PeriodTooSmall { period: String, bound: String },

    #[error("cube-root residue misses window for n={n}, modulus={modulus}: t={t} not in [{lo}, {hi})")]
    WindowMiss {
        n: String,
        modulus: String,
        t: String,
        lo: String,
        hi: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}

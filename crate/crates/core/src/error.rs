//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A particle move violates its preconditions (empty source, full
    /// target, or `x == y`). Signals that `b` vanishes at that move.
    #[error("move {x} -> {y} forbidden: {reason}")]
    MoveForbidden { x: usize, y: usize, reason: String },

    /// An occupancy beyond the truncation level of a countable range was
    /// requested; values are never extrapolated.
    #[error("occupancy {value} exceeds truncation level {cap}")]
    TruncationExceeded { value: u32, cap: u32 },

    /// A fugacity at or above the radius of convergence of the partition
    /// sum.
    #[error("fugacity exp({log_lambda}) at site {site} not below the radius of convergence")]
    RadiusExceeded { site: usize, log_lambda: f64 },

    /// The truncation level cannot certify the requested tail accuracy.
    #[error("truncation level {cap} insufficient: {reason}")]
    TruncationInsufficient { cap: u32, reason: String },

    /// Mass dropped during support truncation exceeded the configured
    /// budget.
    #[error("accumulated tail mass {tail:.3e} exceeds budget {budget:.3e}")]
    TailBudgetExceeded { tail: f64, budget: f64 },

    #[error("numerical underflow: {0}")]
    NumericalUnderflow(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// `gcd` / Bezout of an empty set.
    #[error("empty set")]
    EmptySet,

    #[error("local function unsupported: {0}")]
    UnsupportedFunction(String),

    /// The direct and rearranged generator expectations disagree beyond
    /// tolerance; indicates a broken product-weight identity.
    #[error("generator forms disagree: direct {direct:.6e} vs rearranged {rearranged:.6e}")]
    FormMismatch { direct: f64, rearranged: f64 },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    /// A mathematical invariant failed numerically beyond its slack.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("descriptor parse error: {0}")]
    Descriptor(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidSystem(msg.into())
    }
}

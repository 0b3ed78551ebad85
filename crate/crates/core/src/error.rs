use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar parameter is out of range or not finite.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// A probability vector (`p` or `q`) failed validation.
    #[error("invalid distribution `{field}`: {reason}")]
    InvalidDistribution { field: &'static str, reason: String },

    /// `q[index] * M > 1`: a content would need more than the whole cache.
    #[error("caching distribution infeasible at content {index}: q*M = {load} > 1")]
    Infeasible { index: usize, load: f64 },

    /// An enumeration would exceed its tractability guard.
    #[error("{what} exceeds capacity: {got} > {limit}")]
    Capacity {
        what: &'static str,
        limit: u64,
        got: u64,
    },

    /// Popularity and caching distributions are not co-monotone.
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    /// Zeta series requested at an exponent where it diverges.
    #[error("zeta diverges for v = {v} (requires v > 1)")]
    Divergence { v: f64 },

    /// The cut-set constant `c` makes `cM - c^2 - c^2 M` non-positive.
    #[error("constant choice c = {c} invalid for M = {m}: cM - c^2 - c^2 M = {value} <= 0")]
    ConstantChoice { c: f64, m: f64, value: f64 },

    /// The exponent `1/(K-1)` is undefined for a single user.
    #[error("undefined exponent 1/(K-1) for K = 1")]
    UndefinedExponent,
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn dist(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidDistribution {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed input rather than by a computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::InvalidDistribution { .. }
                | Error::Infeasible { .. }
        )
    }
}

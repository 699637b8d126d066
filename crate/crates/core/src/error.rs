//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library and the CLI plumbing.
#[derive(Debug, Error)]
pub enum Error {
    /// Binomial parameters outside their domain.
    #[error("invalid binomial parameters: n = {n}, theta = {theta} (need n >= 1 and 0 < theta < 1)")]
    BadDistribution { n: u64, theta: f64 },

    /// Equivalence bounds that do not describe a proper open interval.
    #[error("equivalence bounds must satisfy 0 < theta1 < theta2 < 1, got ({theta1}, {theta2})")]
    BadBounds { theta1: f64, theta2: f64 },

    /// An observed count outside `0..=n`.
    #[error("observed count s = {s} lies outside the support 0..={n}")]
    OutOfSupport { s: u64, n: u64 },

    /// A probability-like argument outside `[0, 1]` (or not finite).
    #[error("{name} = {value} must lie in {range}")]
    OutOfUnitRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// An empty input where at least one element is required.
    #[error("{what} must be non-empty")]
    Empty { what: &'static str },

    /// Brute-force enumeration guards against accidental huge inputs.
    #[error("enumeration oracle supports n <= {max}, got n = {n}")]
    OracleGuard { n: u64, max: u64 },

    /// A grid or sweep specification that cannot be realised.
    #[error("invalid configuration: {reason}")]
    BadConfig { reason: String },

    /// A required column is missing from an input table.
    #[error("input data is missing required column '{column}'")]
    MissingColumn { column: String },

    /// Every row of an input table was dropped during cleaning.
    #[error("no usable rows remain after cleaning ({dropped} dropped)")]
    AllRowsDropped { dropped: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand for [`Error::BadConfig`].
    pub fn config(reason: impl Into<String>) -> Self {
        Error::BadConfig {
            reason: reason.into(),
        }
    }
}

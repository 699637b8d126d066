//! Randomized p-values for binomial equivalence testing.
//!
//! The crate is organised bottom-up:
//!
//! * [`binom`] — an exact, dependency-free binomial kernel (pmf, cdf,
//!   survival, quantile) built on exponent-tracked floating point so that
//!   tail probabilities stay accurate far from the mode.
//! * [`pvalue`] — randomized p-values for the interval null
//!   `H: theta <= theta1 or theta >= theta2` against
//!   `K: theta1 < theta < theta2`, plus their exact sampling distributions.
//! * [`power`] — power curves over `n`, over the true success probability,
//!   and over the interval width, with non-monotonicity detection.
//! * [`pi0`] — estimation of the number of true nulls in a family of
//!   p-values and the adaptive Bonferroni correction built on it.
//! * [`mc`] — a deterministic Monte Carlo harness over families of binomial
//!   hypotheses, with counter-based random streams so results are
//!   reproducible bit for bit regardless of thread count.
//! * [`data`] — loading and cleaning of region-level count data.
//! * [`series`] — a small container for paired method curves with CSV/JSON
//!   emission and provenance headers.
//! * [`cli`] — the `randeq` command line interface.

#![forbid(unsafe_code)]

pub mod binom;
pub mod cli;
pub mod data;
pub mod error;
pub mod exec;
pub mod mc;
pub mod pi0;
pub mod power;
pub mod pvalue;
pub mod series;

pub use error::{Error, Result};

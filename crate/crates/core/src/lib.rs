//! Exact analysis of when rational recurrence sequences become constant.
//!
//! A recurrence *converges to `K`* here in the exact sense: every term from
//! some index `M` onward equals `K`. Asymptotic approach does not count.
//!
//! The crate provides
//! - closed-form deciders for linear recurrences and the three-lag polynomial
//!   example family ([`analyzer`]),
//! - an exact forward-simulation oracle ([`oracle`]),
//! - generating-function cancellation checks on truncated series
//!   ([`gf_verifier`]),
//! - a grid sweep that cross-checks the closed forms against the oracle
//!   ([`xval`]),
//! - the `.rec` text format ([`dsl`]).

pub mod analyzer;
pub mod dsl;
pub mod gf_verifier;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod xval;

pub use numeric::{rat, Rational, TruncatedSeries};

//! Exact scalars and truncated power series.

mod rational;
mod series;

pub use rational::{rat, Rational, RationalParseError};
pub use series::TruncatedSeries;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("degree bounds differ: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },
    #[error("coefficient index {index} outside degree bound {degree_bound}")]
    IndexOutOfRange { index: usize, degree_bound: usize },
    #[error("more than degree_bound + 1 coefficients supplied (degree bound {degree_bound})")]
    TooManyCoefficients { degree_bound: usize },
}

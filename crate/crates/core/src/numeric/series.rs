//! Truncated formal power series with exact rational coefficients.
//!
//! A series carries an explicit degree bound `D` and always stores exactly
//! `D + 1` coefficients. Binary operations require matching bounds and discard
//! everything above `x^D`.

use serde::Serialize;

use super::{NumericError, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TruncatedSeries {
    degree_bound: usize,
    coeffs: Vec<Rational>,
}

impl TruncatedSeries {
    pub fn zero(degree_bound: usize) -> Self {
        TruncatedSeries {
            degree_bound,
            coeffs: vec![Rational::zero(); degree_bound + 1],
        }
    }

    pub fn one(degree_bound: usize) -> Self {
        let mut s = Self::zero(degree_bound);
        s.coeffs[0] = Rational::one();
        s
    }

    /// Builds a series from leading coefficients, zero-padding up to `x^D`.
    ///
    /// Supplying more than `D + 1` coefficients is an error rather than a
    /// silent truncation.
    pub fn from_coeffs(
        degree_bound: usize,
        coeffs: impl IntoIterator<Item = Rational>,
    ) -> Result<Self, NumericError> {
        let mut s = Self::zero(degree_bound);
        for (i, c) in coeffs.into_iter().enumerate() {
            if i > degree_bound {
                return Err(NumericError::TooManyCoefficients { degree_bound });
            }
            s.coeffs[i] = c;
        }
        Ok(s)
    }

    /// Sets the coefficient of `x^i`.
    pub fn set(&mut self, i: usize, value: Rational) -> Result<(), NumericError> {
        let degree_bound = self.degree_bound;
        let slot = self
            .coeffs
            .get_mut(i)
            .ok_or(NumericError::IndexOutOfRange { index: i, degree_bound })?;
        *slot = value;
        Ok(())
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Exact coefficient of `x^i`.
    pub fn coeff(&self, i: usize) -> Result<&Rational, NumericError> {
        self.coeffs.get(i).ok_or(NumericError::IndexOutOfRange {
            index: i,
            degree_bound: self.degree_bound,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Rational::is_zero)
    }

    fn check_bounds(&self, other: &Self) -> Result<(), NumericError> {
        if self.degree_bound != other.degree_bound {
            return Err(NumericError::DegreeMismatch {
                left: self.degree_bound,
                right: other.degree_bound,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, NumericError> {
        self.check_bounds(other)?;
        Ok(TruncatedSeries {
            degree_bound: self.degree_bound,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, NumericError> {
        self.check_bounds(other)?;
        Ok(TruncatedSeries {
            degree_bound: self.degree_bound,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        TruncatedSeries {
            degree_bound: self.degree_bound,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Cauchy product truncated at `x^D`.
    ///
    /// Zero coefficients on the left are skipped, which matters for the sparse
    /// `A(x)` factors the identity checks multiply by.
    pub fn mul(&self, other: &Self) -> Result<Self, NumericError> {
        self.check_bounds(other)?;
        let d = self.degree_bound;
        let mut out = vec![Rational::zero(); d + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs[..=d - i].iter().enumerate() {
                if !b.is_zero() {
                    out[i + j] += a * b;
                }
            }
        }
        Ok(TruncatedSeries {
            degree_bound: d,
            coeffs: out,
        })
    }
}

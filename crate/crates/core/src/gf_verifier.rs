//! Generating-function cancellation checks on truncated series.
//!
//! For a linear recurrence with trajectory `p_0..p_N`, let
//! `A(x) = 1 - a_1 x - ... - a_L x^L`, `P(x) = p_0 + ... + p_N x^N` and
//! `B(x) = d (x^L + ... + x^N)`. Then `R = A P - B` has
//!
//! - a head (`x^0..x^{L-1}`) depending only on the initial values,
//! - a middle (`x^L..x^N`) that vanishes exactly because the terms obey the
//!   recurrence,
//! - a tail (`x^{N+1}..x^{N+L}`) depending only on the last `L` terms.
//!
//! The three-lag family has the analogous four-product identity
//! `A1 P1 + A2 P2 + A3 P3 + A4 P4`. Everything is checked coefficient by
//! coefficient with exact arithmetic; there is no tolerance anywhere.

use serde::Serialize;
use thiserror::Error;

use crate::model::{LinearRecurrence, Rule, ThreeLagFamily};
use crate::numeric::{NumericError, Rational, TruncatedSeries};
use crate::oracle::{simulate, OracleConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("degree bound {degree_bound} below required {required}")]
    DegreeTooSmall { degree_bound: usize, required: usize },
    #[error("N = {n} must be at least {required}")]
    NTooSmall { n: usize, required: usize },
    #[error("trajectory has {found} terms, N = {n} needs {needed}")]
    TrajectoryLength { n: usize, needed: usize, found: usize },
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoeffCheck {
    pub index: usize,
    pub expected: Rational,
    pub actual: Rational,
    pub matches: bool,
}

impl CoeffCheck {
    fn new(index: usize, expected: Rational, series: &TruncatedSeries) -> Result<Self, GfError> {
        let actual = series.coeff(index)?.clone();
        Ok(CoeffCheck {
            index,
            matches: actual == expected,
            expected,
            actual,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MiddleRange {
    pub start: usize,
    pub end: usize,
    pub all_zero: bool,
    pub first_violation: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CancellationReport {
    pub n: usize,
    /// Head coefficients against the initial-value formulas.
    pub head: Vec<CoeffCheck>,
    pub middle: MiddleRange,
    /// Tail coefficients against the last-terms formulas.
    pub tail: Vec<CoeffCheck>,
    /// Tail against the closed forms with every trailing term replaced by
    /// `K`; present only when the trajectory is certified constant at `K`
    /// over the last `L` indices.
    pub tail_closed_form: Option<Vec<CoeffCheck>>,
    /// All coefficients of `R`, `x^0..x^{N+L}`.
    pub coefficients: Vec<Rational>,
}

impl CancellationReport {
    pub fn ok(&self) -> bool {
        self.middle.all_zero
            && self.head.iter().all(|c| c.matches)
            && self.tail.iter().all(|c| c.matches)
            && self
                .tail_closed_form
                .as_ref()
                .is_none_or(|t| t.iter().all(|c| c.matches))
    }
}

fn middle_range(series: &TruncatedSeries, start: usize, end: usize) -> MiddleRange {
    let first_violation = (start..=end).find(|&i| !series.coeffs()[i].is_zero());
    MiddleRange {
        start,
        end,
        all_zero: first_violation.is_none(),
        first_violation,
    }
}

/// `A(x) = 1 - a_1 x - ... - a_L x^L` at degree bound `degree_bound`.
pub fn build_a(rec: &LinearRecurrence, degree_bound: usize) -> Result<TruncatedSeries, GfError> {
    let order = rec.order();
    if degree_bound < order {
        return Err(GfError::DegreeTooSmall {
            degree_bound,
            required: order,
        });
    }
    let coeffs = std::iter::once(Rational::one()).chain(rec.coeffs().iter().map(|a| -a));
    Ok(TruncatedSeries::from_coeffs(degree_bound, coeffs)?)
}

/// `B(x) = d (x^L + ... + x^N)` at degree bound `degree_bound`.
pub fn build_b(rec: &LinearRecurrence, n: usize, degree_bound: usize) -> Result<TruncatedSeries, GfError> {
    let order = rec.order();
    if n < order {
        return Err(GfError::NTooSmall { n, required: order });
    }
    if degree_bound < n {
        return Err(GfError::DegreeTooSmall {
            degree_bound,
            required: n,
        });
    }
    let mut b = TruncatedSeries::zero(degree_bound);
    for i in order..=n {
        b.set(i, rec.constant().clone())?;
    }
    Ok(b)
}

fn series_from(degree_bound: usize, terms: &[Rational]) -> Result<TruncatedSeries, GfError> {
    Ok(TruncatedSeries::from_coeffs(degree_bound, terms.iter().cloned())?)
}

/// Builds the trajectory by simulation and checks `A P - B`.
///
/// When `target` is given and the oracle certifies convergence to it with
/// `M <= N - L`, the tail is also compared with `K (-a_j - ... - a_L)`.
pub fn check_linear_identity(
    rec: &LinearRecurrence,
    target: Option<&Rational>,
    n: usize,
) -> Result<CancellationReport, GfError> {
    let order = rec.order();
    if n < order {
        return Err(GfError::NTooSmall { n, required: order });
    }
    let trajectory = rec.trajectory(n + 1);
    let closed_form = target.filter(|k| converged_by(rec, k, n, order));
    check_linear_trajectory(rec, &trajectory, closed_form)
}

/// True when the oracle certifies constancy at `k` from an index `<= n - lags`.
fn converged_by<R: Rule>(rec: &R, k: &Rational, n: usize, lags: usize) -> bool {
    let cfg = OracleConfig {
        max_steps: n as u64,
        max_bits: u64::MAX,
    };
    simulate(rec, k, &cfg)
        .m()
        .is_some_and(|m| m as usize + lags <= n)
}

/// Checks `A P - B` for an arbitrary trajectory `p_0..p_N`, which need not
/// obey the recurrence (the middle then fails to vanish).
///
/// `closed_form` requests the constant-tail comparison at that `K`; the
/// caller is responsible for it being meaningful.
pub fn check_linear_trajectory(
    rec: &LinearRecurrence,
    trajectory: &[Rational],
    closed_form: Option<&Rational>,
) -> Result<CancellationReport, GfError> {
    let order = rec.order();
    let Some(n) = trajectory.len().checked_sub(1).filter(|&n| n >= order) else {
        return Err(GfError::TrajectoryLength {
            n: order,
            needed: order + 1,
            found: trajectory.len(),
        });
    };
    let degree_bound = n + order;
    let a = build_a(rec, degree_bound)?;
    let b = build_b(rec, n, degree_bound)?;
    let p = series_from(degree_bound, trajectory)?;
    let r = a.mul(&p)?.sub(&b)?;

    let coeffs = rec.coeffs();
    // a_k for k = 1..=L lives at coeffs[k - 1].
    let head = (0..order)
        .map(|i| {
            let mut expected = trajectory[i].clone();
            for k in 1..=i {
                expected -= &coeffs[k - 1] * &trajectory[i - k];
            }
            CoeffCheck::new(i, expected, &r)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let tail = (1..=order)
        .map(|j| {
            let mut expected = Rational::zero();
            for k in j..=order {
                expected -= &coeffs[k - 1] * &trajectory[n + j - k];
            }
            CoeffCheck::new(n + j, expected, &r)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let tail_closed_form = closed_form
        .map(|k| {
            (1..=order)
                .map(|j| {
                    let partial: Rational = coeffs[j - 1..].iter().sum();
                    CoeffCheck::new(n + j, -(k * &partial), &r)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;

    Ok(CancellationReport {
        n,
        head,
        middle: middle_range(&r, order, n),
        tail,
        tail_closed_form,
        coefficients: r.coeffs().to_vec(),
    })
}

/// Simulates the three-lag family to `r_N` and checks
/// `A1 P1 + A2 P2 + A3 P3 + A4 P4`.
pub fn check_example_identity(
    family: &ThreeLagFamily,
    target: Option<&Rational>,
    n: usize,
) -> Result<CancellationReport, GfError> {
    if n < 3 {
        return Err(GfError::NTooSmall { n, required: 3 });
    }
    let rec = family.recurrence();
    let trajectory = rec.trajectory(n + 1);
    let closed_form = target.filter(|k| converged_by(&rec, k, n, 2));
    check_example_trajectory(family, &trajectory, closed_form)
}

/// The four-product identity for an arbitrary trajectory `r_0..r_N`.
///
/// - `A1 = 1 - a1 x + a1 x^3`, `P1 = sum r_i x^i`
/// - `A2 = -a2 x^2`,          `P2 = sum r_i^2 x^i`
/// - `A3 = -a3 x^3`,          `P3 = sum_{i <= N-2} r_i r_{i+2} x^i`
/// - `A4 = -d`,               `P4 = sum x^i`
pub fn check_example_trajectory(
    family: &ThreeLagFamily,
    trajectory: &[Rational],
    closed_form: Option<&Rational>,
) -> Result<CancellationReport, GfError> {
    let Some(n) = trajectory.len().checked_sub(1).filter(|&n| n >= 3) else {
        return Err(GfError::TrajectoryLength {
            n: 3,
            needed: 4,
            found: trajectory.len(),
        });
    };
    let ThreeLagFamily { a1, a2, a3, d, .. } = family;
    let r = trajectory;
    let degree_bound = n + 3;
    let zero = Rational::zero();

    let a1_series = TruncatedSeries::from_coeffs(
        degree_bound,
        [Rational::one(), -a1, zero.clone(), a1.clone()],
    )?;
    let a2_series = TruncatedSeries::from_coeffs(degree_bound, [zero.clone(), zero.clone(), -a2])?;
    let a3_series =
        TruncatedSeries::from_coeffs(degree_bound, [zero.clone(), zero.clone(), zero.clone(), -a3])?;
    let a4_series = TruncatedSeries::from_coeffs(degree_bound, [-d])?;

    let p1 = series_from(degree_bound, r)?;
    let squares: Vec<Rational> = r.iter().map(|v| v * v).collect();
    let p2 = series_from(degree_bound, &squares)?;
    let products: Vec<Rational> = (0..=n - 2).map(|i| &r[i] * &r[i + 2]).collect();
    let p3 = series_from(degree_bound, &products)?;
    let p4 = series_from(degree_bound, &vec![Rational::one(); n + 1])?;

    let total = a1_series
        .mul(&p1)?
        .add(&a2_series.mul(&p2)?)?
        .add(&a3_series.mul(&p3)?)?
        .add(&a4_series.mul(&p4)?)?;

    let head_expected = [
        &r[0] - d,
        &r[1] - &(a1 * &r[0]) - d,
        &r[2] - &(a1 * &r[1]) - &(a2 * &(&r[0] * &r[0])) - d,
    ];
    let head = head_expected
        .into_iter()
        .enumerate()
        .map(|(i, e)| CoeffCheck::new(i, e, &total))
        .collect::<Result<Vec<_>, _>>()?;

    let tail_expected = [
        -(a1 * &r[n]) + a1 * &r[n - 2] - a2 * &(&r[n - 1] * &r[n - 1]) - a3 * &(&r[n - 2] * &r[n]),
        a1 * &r[n - 1] - a2 * &(&r[n] * &r[n]),
        a1 * &r[n],
    ];
    let tail = tail_expected
        .into_iter()
        .enumerate()
        .map(|(j, e)| CoeffCheck::new(n + 1 + j, e, &total))
        .collect::<Result<Vec<_>, _>>()?;

    let tail_closed_form = closed_form
        .map(|k| {
            let k2 = k * k;
            let forms = [
                -(a2 * &k2) - a3 * &k2,
                a1 * k - a2 * &k2,
                a1 * k,
            ];
            forms
                .into_iter()
                .enumerate()
                .map(|(j, e)| CoeffCheck::new(n + 1 + j, e, &total))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;

    Ok(CancellationReport {
        n,
        head,
        middle: middle_range(&total, 3, n),
        tail,
        tail_closed_form,
        coefficients: total.coeffs().to_vec(),
    })
}

//! Closed-form convergence deciders.
//!
//! Linear recurrences are settled completely by [`decide_linear`]. For
//! polynomial recurrences only necessary conditions are available in general
//! ([`decide_poly_zero`], [`fixed_point_residual`]); the three-lag family
//! additionally has the closed-form [`condition_v`], which the sweep harness
//! checks against the oracle.

use serde::Serialize;
use thiserror::Error;

use crate::model::{LinearRecurrence, Method, Outcome, PolynomialRecurrence, Rule, ThreeLagFamily, Verdict};
use crate::numeric::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzerError {
    #[error("prefix has {found} terms; M = {m} needs at least {needed}")]
    PrefixTooShort { m: usize, needed: usize, found: usize },
}

/// One equality of a condition, stored as its residual `lhs - rhs`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Clause {
    pub name: String,
    pub value: Rational,
    pub satisfied: bool,
}

impl Clause {
    /// Clause that holds iff `value == 0`.
    fn zero(name: impl Into<String>, value: Rational) -> Self {
        let satisfied = value.is_zero();
        Clause {
            name: name.into(),
            value,
            satisfied,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionBreakdown {
    pub clauses: Vec<Clause>,
    pub overall: bool,
}

impl ConditionBreakdown {
    fn conjunction(clauses: Vec<Clause>) -> Self {
        let overall = clauses.iter().all(|c| c.satisfied);
        ConditionBreakdown { clauses, overall }
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }
}

fn initials_equal(rec: &LinearRecurrence, target: &Rational) -> Vec<Clause> {
    rec.initials()
        .iter()
        .enumerate()
        .map(|(i, c)| Clause::zero(format!("c{i} = K"), c - target))
        .collect()
}

/// Decides exact convergence of a linear recurrence to `target`.
///
/// | d    | K    | rule                                   |
/// |------|------|----------------------------------------|
/// | 0    | 0    | all `c_i = 0`                          |
/// | 0    | != 0 | all `c_i = K` and `sum a = 1`          |
/// | != 0 | 0    | never                                  |
/// | != 0 | != 0 | all `c_i = K` and `sum a = 1 - d/K`    |
///
/// With `a_L != 0` the rule can be run backwards uniquely, so `L` consecutive
/// `K`s force every earlier term to be `K` too; success always has `M = 0`.
pub fn decide_linear(rec: &LinearRecurrence, target: &Rational) -> (Verdict, ConditionBreakdown) {
    let d = rec.constant();
    match (d.is_zero(), target.is_zero()) {
        (true, true) => {
            let breakdown = ConditionBreakdown::conjunction(initials_equal(rec, target));
            let verdict = if breakdown.overall {
                Verdict::converges(0, Method::Theorem1)
            } else {
                Verdict::does_not_converge("some initial value is nonzero", Method::Theorem1)
            };
            (verdict, breakdown)
        }
        (true, false) => {
            let mut clauses = initials_equal(rec, target);
            clauses.push(Clause::zero("sum(a) = 1", rec.coeff_sum() - Rational::one()));
            let breakdown = ConditionBreakdown::conjunction(clauses);
            let verdict = if breakdown.overall {
                Verdict::converges(0, Method::Theorem2)
            } else {
                Verdict::does_not_converge(failed_reason(&breakdown), Method::Theorem2)
            };
            (verdict, breakdown)
        }
        (false, true) => {
            let breakdown = ConditionBreakdown {
                clauses: vec![Clause::zero("d = 0", d.clone())],
                overall: false,
            };
            let verdict = Verdict::does_not_converge(
                "nonzero constant term: L zeros are always followed by d",
                Method::Theorem3,
            );
            (verdict, breakdown)
        }
        (false, false) => {
            let mut clauses = initials_equal(rec, target);
            let rhs = Rational::one() - d / target;
            clauses.push(Clause::zero("sum(a) = 1 - d/K", rec.coeff_sum() - rhs));
            let breakdown = ConditionBreakdown::conjunction(clauses);
            let verdict = if breakdown.overall {
                Verdict::converges(0, Method::Theorem4)
            } else {
                Verdict::does_not_converge(failed_reason(&breakdown), Method::Theorem4)
            };
            (verdict, breakdown)
        }
    }
}

fn failed_reason(breakdown: &ConditionBreakdown) -> String {
    let failed: Vec<&str> = breakdown
        .clauses
        .iter()
        .filter(|c| !c.satisfied)
        .map(|c| c.name.as_str())
        .collect();
    format!("violated: {}", failed.join(", "))
}

/// `step(K, ..., K) - K`. A nonzero residual rules out convergence to `K`.
pub fn fixed_point_residual<R: Rule + ?Sized>(rec: &R, target: &Rational) -> Rational {
    rec.fixed_point_residual(target)
}

/// Gate for target zero on a polynomial recurrence.
///
/// A nonzero constant term means a run of `L` zeros is followed by that
/// constant, so zero is unreachable as a limit. With a zero constant term
/// nothing closed-form is known and the verdict is `Unknown`.
pub fn decide_poly_zero(rec: &PolynomialRecurrence) -> Verdict {
    if rec.constant_term().is_zero() {
        Verdict {
            outcome: Outcome::Unknown {
                steps_used: 0,
                bits_cap_hit: false,
            },
            method: Method::Theorem3,
        }
    } else {
        Verdict::does_not_converge(
            "nonzero constant term: L zeros are always followed by it",
            Method::Theorem3,
        )
    }
}

/// Names of the clauses reported by [`condition_v`].
pub mod v_clauses {
    pub const FIXED_POINT: &str = "K - a2 K^2 - a3 K^2 - d = 0";
    pub const INITIAL_SUM: &str =
        "c0 - 3d + c1 - a1 c0 + c2 - a1 c1 - a2 c0^2 + 2 a1 K - 2 a2 K^2 - a3 K^2 = 0";
    pub const SIGN_PLUS: &str = "2 K^2 a3 + d = 0";
    pub const SIGN_MINUS: &str = "2 K^2 a3 - d = 0";
}

/// The published closed-form condition for the three-lag family, evaluated
/// verbatim:
///
/// ```text
/// (K - a2 K^2 - a3 K^2 - d = 0)
///   AND (c0 - 3d + c1 - a1 c0 + c2 - a1 c1 - a2 c0^2 + 2 a1 K - 2 a2 K^2 - a3 K^2 = 0)
///   AND ((2 K^2 a3 + d = 0) OR (2 K^2 a3 - d = 0))
/// ```
///
/// It is not a correct characterisation for `d != 0`: the constant rule
/// `r[i] = d` with `c = (d, d, d)` converges to `d` yet fails the last
/// clause. [`crate::xval::sweep_condition_v`] exists to surface such cases.
pub fn condition_v(family: &ThreeLagFamily, target: &Rational) -> ConditionBreakdown {
    let ThreeLagFamily { a1, a2, a3, d, initials } = family;
    let [c0, c1, c2] = initials;
    let k = target;
    let k2 = k * k;
    let two = Rational::from(2);

    let fixed = k - &(a2 * &k2) - (a3 * &k2) - d;
    let initial_sum = c0 - &(&two * d) - d + c1 - (a1 * c0) + c2 - (a1 * c1) - (a2 * &(c0 * c0))
        + (&two * &(a1 * k))
        - (&two * &(a2 * &k2))
        - (a3 * &k2);
    let two_k2_a3 = &two * &(&k2 * a3);
    let plus = &two_k2_a3 + d;
    let minus = &two_k2_a3 - d;

    let clauses = vec![
        Clause::zero(v_clauses::FIXED_POINT, fixed),
        Clause::zero(v_clauses::INITIAL_SUM, initial_sum),
        Clause::zero(v_clauses::SIGN_PLUS, plus),
        Clause::zero(v_clauses::SIGN_MINUS, minus),
    ];
    let overall = clauses[0].satisfied && clauses[1].satisfied && (clauses[2].satisfied || clauses[3].satisfied);
    ConditionBreakdown { clauses, overall }
}

/// Finite alternating sums over the pre-convergence prefix:
///
/// `sum_{i<M} (-1)^i r_i  -  a2 sum_{i<M} (-1)^i r_i^2  +  a3 sum_{i<M} (-1)^i r_i r_{i+2}  -  d sum_{i<M} (-1)^i`
///
/// The `r_i r_{i+2}` products read up to `r_{M+1}`, so for `M > 0` the prefix
/// must hold at least `M + 2` terms. `M = 0` gives 0.
pub fn phi(
    prefix: &[Rational],
    m: usize,
    a2: &Rational,
    a3: &Rational,
    d: &Rational,
) -> Result<Rational, AnalyzerError> {
    if m == 0 {
        return Ok(Rational::zero());
    }
    let needed = m + 2;
    if prefix.len() < needed {
        return Err(AnalyzerError::PrefixTooShort {
            m,
            needed,
            found: prefix.len(),
        });
    }
    let mut linear = Rational::zero();
    let mut squares = Rational::zero();
    let mut products = Rational::zero();
    let mut ones = Rational::zero();
    for i in 0..m {
        let r = &prefix[i];
        let square = r * r;
        let product = r * &prefix[i + 2];
        if i % 2 == 0 {
            linear += r;
            squares += square;
            products += product;
            ones += Rational::one();
        } else {
            linear -= r;
            squares -= square;
            products -= product;
            ones -= Rational::one();
        }
    }
    Ok(linear - a2 * &squares + a3 * &products - d * &ones)
}

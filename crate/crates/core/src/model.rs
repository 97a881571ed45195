//! Recurrence data model: linear and polynomial rules, validation, and
//! single forward steps.
//!
//! Windows passed to `step` are ordered most-recent first, so `window[0]`
//! plays `r[i-1]` and `window[L-1]` plays `r[i-L]`.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::numeric::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("order must be positive")]
    ZeroOrder,
    #[error("a_L must be nonzero")]
    LeadingCoefficientZero,
    #[error("expected {expected} initial values, found {found}")]
    InitialsLength { expected: usize, found: usize },
    #[error("exponent vector has length {found}, expected {expected}")]
    ExponentVectorLength { expected: usize, found: usize },
    #[error("lag {lag} exceeds order {order}")]
    LagExceedsOrder { lag: usize, order: usize },
    #[error("exponent {exponent} outside [0, {bound}]")]
    ExponentOutOfRange { exponent: u32, bound: u32 },
    #[error("degree bound must be positive")]
    ZeroDegreeBound,
    #[error("no term references lag {order}; declared order is larger than the rule needs")]
    DeepestLagUnused { order: usize },
    #[error("window has {found} terms, expected {expected}")]
    WindowLength { expected: usize, found: usize },
}

/// Behaviour shared by every recurrence rule.
pub trait Rule {
    fn order(&self) -> usize;

    fn initials(&self) -> &[Rational];

    /// One forward step. `window` holds the last `order()` terms,
    /// most recent first.
    fn step(&self, window: &[Rational]) -> Result<Rational, ModelError>;

    /// Value of the rule when every lag reads zero.
    fn constant_term(&self) -> Rational;

    /// `step(K, ..., K) - K`; zero iff `K` is a fixed point of the rule.
    fn fixed_point_residual(&self, target: &Rational) -> Rational {
        let window = vec![target.clone(); self.order()];
        let next = self
            .step(&window)
            .expect("constant window always has order() entries");
        next - target
    }

    /// The first `len` terms of the trajectory, starting with the initials.
    fn trajectory(&self, len: usize) -> Vec<Rational> {
        let order = self.order();
        let mut terms: Vec<Rational> = self.initials().iter().take(len).cloned().collect();
        let mut window = Vec::with_capacity(order);
        while terms.len() < len {
            window.clear();
            window.extend(terms.iter().rev().take(order).cloned());
            let next = self.step(&window).expect("window sized from order()");
            terms.push(next);
        }
        terms
    }
}

fn check_window(order: usize, window: &[Rational]) -> Result<(), ModelError> {
    if window.len() != order {
        return Err(ModelError::WindowLength {
            expected: order,
            found: window.len(),
        });
    }
    Ok(())
}

/// `p[i] = a_1 p[i-1] + ... + a_L p[i-L] + d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinearRecurrence {
    coeffs: Vec<Rational>,
    initials: Vec<Rational>,
    constant: Rational,
}

impl LinearRecurrence {
    pub fn new(
        coeffs: Vec<Rational>,
        initials: Vec<Rational>,
        constant: Rational,
    ) -> Result<Self, ModelError> {
        let rec = LinearRecurrence {
            coeffs,
            initials,
            constant,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn homogeneous(coeffs: Vec<Rational>, initials: Vec<Rational>) -> Result<Self, ModelError> {
        Self::new(coeffs, initials, Rational::zero())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let order = self.coeffs.len();
        if order == 0 {
            return Err(ModelError::ZeroOrder);
        }
        if self.coeffs[order - 1].is_zero() {
            return Err(ModelError::LeadingCoefficientZero);
        }
        if self.initials.len() != order {
            return Err(ModelError::InitialsLength {
                expected: order,
                found: self.initials.len(),
            });
        }
        Ok(())
    }

    /// `a_1 .. a_L`.
    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn constant(&self) -> &Rational {
        &self.constant
    }

    pub fn is_homogeneous(&self) -> bool {
        self.constant.is_zero()
    }

    pub fn coeff_sum(&self) -> Rational {
        self.coeffs.iter().sum()
    }

    /// Same rule with `H = 1`: unit exponent vectors carry `a_k`, the zero
    /// vector carries `d`.
    pub fn as_polynomial(&self) -> PolynomialRecurrence {
        let order = self.order();
        let mut terms = BTreeMap::new();
        if !self.constant.is_zero() {
            terms.insert(vec![0; order], self.constant.clone());
        }
        for (k, a) in self.coeffs.iter().enumerate() {
            if !a.is_zero() {
                let mut exps = vec![0; order];
                exps[k] = 1;
                terms.insert(exps, a.clone());
            }
        }
        PolynomialRecurrence {
            order,
            degree_bound: 1,
            terms,
            initials: self.initials.clone(),
        }
    }
}

impl Rule for LinearRecurrence {
    fn order(&self) -> usize {
        self.coeffs.len()
    }

    fn initials(&self) -> &[Rational] {
        &self.initials
    }

    fn step(&self, window: &[Rational]) -> Result<Rational, ModelError> {
        check_window(self.order(), window)?;
        let mut acc = self.constant.clone();
        for (a, p) in self.coeffs.iter().zip(window) {
            if !a.is_zero() {
                acc += a * p;
            }
        }
        Ok(acc)
    }

    fn constant_term(&self) -> Rational {
        self.constant.clone()
    }
}

/// Sum over exponent vectors `(j_1..j_L)` of `a_j * r[i-1]^j_1 * ... * r[i-L]^j_L`.
///
/// Terms with a zero coefficient are kept: they still record which lags the
/// rule's shape references, which matters for the deepest-lag check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PolynomialRecurrence {
    order: usize,
    degree_bound: u32,
    #[serde(serialize_with = "serialize_terms")]
    terms: BTreeMap<Vec<u32>, Rational>,
    initials: Vec<Rational>,
}

/// JSON maps need string keys, so terms go out as a list of
/// `{"exponents": [...], "coeff": "..."}` records.
fn serialize_terms<S: serde::Serializer>(
    terms: &BTreeMap<Vec<u32>, Rational>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Term<'a> {
        exponents: &'a [u32],
        coeff: &'a Rational,
    }
    serializer.collect_seq(terms.iter().map(|(e, c)| Term {
        exponents: e,
        coeff: c,
    }))
}

impl PolynomialRecurrence {
    /// Repeated exponent vectors have their coefficients summed.
    pub fn new(
        order: usize,
        degree_bound: u32,
        terms: impl IntoIterator<Item = (Vec<u32>, Rational)>,
        initials: Vec<Rational>,
    ) -> Result<Self, ModelError> {
        let mut merged: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
        for (exps, coeff) in terms {
            *merged.entry(exps).or_default() += coeff;
        }
        let rec = PolynomialRecurrence {
            order,
            degree_bound,
            terms: merged,
            initials,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.order == 0 {
            return Err(ModelError::ZeroOrder);
        }
        if self.degree_bound == 0 {
            return Err(ModelError::ZeroDegreeBound);
        }
        for exps in self.terms.keys() {
            if exps.len() != self.order {
                if let Some(pos) = exps.iter().rposition(|&e| e > 0).filter(|&p| p >= self.order) {
                    return Err(ModelError::LagExceedsOrder {
                        lag: pos + 1,
                        order: self.order,
                    });
                }
                return Err(ModelError::ExponentVectorLength {
                    expected: self.order,
                    found: exps.len(),
                });
            }
            if let Some(&e) = exps.iter().find(|&&e| e > self.degree_bound) {
                return Err(ModelError::ExponentOutOfRange {
                    exponent: e,
                    bound: self.degree_bound,
                });
            }
        }
        if !self.terms.keys().any(|e| e[self.order - 1] > 0) {
            return Err(ModelError::DeepestLagUnused { order: self.order });
        }
        if self.initials.len() != self.order {
            return Err(ModelError::InitialsLength {
                expected: self.order,
                found: self.initials.len(),
            });
        }
        Ok(())
    }

    pub fn degree_bound(&self) -> u32 {
        self.degree_bound
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, Rational> {
        &self.terms
    }

    /// Coefficient of an exponent vector, zero when absent.
    pub fn coeff(&self, exps: &[u32]) -> Rational {
        self.terms.get(exps).cloned().unwrap_or_default()
    }
}

impl Rule for PolynomialRecurrence {
    fn order(&self) -> usize {
        self.order
    }

    fn initials(&self) -> &[Rational] {
        &self.initials
    }

    fn step(&self, window: &[Rational]) -> Result<Rational, ModelError> {
        check_window(self.order, window)?;
        let mut acc = Rational::zero();
        for (exps, coeff) in &self.terms {
            if coeff.is_zero() {
                continue;
            }
            let mut term = coeff.clone();
            for (value, &e) in window.iter().zip(exps) {
                if e > 0 {
                    term *= &value.pow(e);
                }
            }
            acc += term;
        }
        Ok(acc)
    }

    fn constant_term(&self) -> Rational {
        self.coeff(&vec![0; self.order])
    }
}

/// Either flavour of recurrence, as produced by the `.rec` parser.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Recurrence {
    Linear(LinearRecurrence),
    Polynomial(PolynomialRecurrence),
}

impl Recurrence {
    pub fn as_polynomial(&self) -> PolynomialRecurrence {
        match self {
            Recurrence::Linear(l) => l.as_polynomial(),
            Recurrence::Polynomial(p) => p.clone(),
        }
    }
}

impl Rule for Recurrence {
    fn order(&self) -> usize {
        match self {
            Recurrence::Linear(r) => r.order(),
            Recurrence::Polynomial(r) => r.order(),
        }
    }

    fn initials(&self) -> &[Rational] {
        match self {
            Recurrence::Linear(r) => r.initials(),
            Recurrence::Polynomial(r) => r.initials(),
        }
    }

    fn step(&self, window: &[Rational]) -> Result<Rational, ModelError> {
        match self {
            Recurrence::Linear(r) => r.step(window),
            Recurrence::Polynomial(r) => r.step(window),
        }
    }

    fn constant_term(&self) -> Rational {
        match self {
            Recurrence::Linear(r) => r.constant_term(),
            Recurrence::Polynomial(r) => r.constant_term(),
        }
    }
}

/// The three-lag quadratic family
/// `r[i] = a1 (r[i-1] - r[i-3]) + a2 r[i-2]^2 + a3 r[i-3] r[i-1] + d`.
///
/// This is the one polynomial family with a closed-form convergence
/// condition ([`crate::analyzer::condition_v`]).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ThreeLagFamily {
    pub a1: Rational,
    pub a2: Rational,
    pub a3: Rational,
    pub d: Rational,
    pub initials: [Rational; 3],
}

const LAG1: [u32; 3] = [1, 0, 0];
const LAG3: [u32; 3] = [0, 0, 1];
const LAG2_SQUARED: [u32; 3] = [0, 2, 0];
const LAG1_LAG3: [u32; 3] = [1, 0, 1];
const CONSTANT: [u32; 3] = [0, 0, 0];

impl ThreeLagFamily {
    /// Polynomial form. All five monomials are always present (possibly with
    /// zero coefficients) so the rule keeps order 3 for every parameter choice.
    pub fn recurrence(&self) -> PolynomialRecurrence {
        let terms = [
            (CONSTANT.to_vec(), self.d.clone()),
            (LAG1.to_vec(), self.a1.clone()),
            (LAG3.to_vec(), -&self.a1),
            (LAG2_SQUARED.to_vec(), self.a2.clone()),
            (LAG1_LAG3.to_vec(), self.a3.clone()),
        ];
        PolynomialRecurrence::new(3, 2, terms, self.initials.to_vec())
            .expect("family shape is always valid")
    }

    /// Recognises a polynomial recurrence of this family's shape.
    pub fn from_polynomial(rec: &PolynomialRecurrence) -> Option<Self> {
        if rec.order() != 3 {
            return None;
        }
        let allowed = [CONSTANT, LAG1, LAG3, LAG2_SQUARED, LAG1_LAG3];
        if rec
            .terms()
            .keys()
            .any(|e| !allowed.iter().any(|a| a.as_slice() == e.as_slice()))
        {
            return None;
        }
        let a1 = rec.coeff(&LAG1);
        if rec.coeff(&LAG3) != -&a1 {
            return None;
        }
        let init = rec.initials();
        Some(ThreeLagFamily {
            a1,
            a2: rec.coeff(&LAG2_SQUARED),
            a3: rec.coeff(&LAG1_LAG3),
            d: rec.coeff(&CONSTANT),
            initials: [init[0].clone(), init[1].clone(), init[2].clone()],
        })
    }
}

/// Which procedure produced a verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "theorem-1")]
    Theorem1,
    #[serde(rename = "theorem-2")]
    Theorem2,
    #[serde(rename = "theorem-3")]
    Theorem3,
    #[serde(rename = "theorem-4")]
    Theorem4,
    FixedPoint,
    Oracle,
    ConditionV,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Theorem1 => "theorem-1",
            Method::Theorem2 => "theorem-2",
            Method::Theorem3 => "theorem-3",
            Method::Theorem4 => "theorem-4",
            Method::FixedPoint => "fixed-point",
            Method::Oracle => "oracle",
            Method::ConditionV => "condition-v",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    /// Every term from index `m` on equals the target.
    Converges { m: u64 },
    DoesNotConverge { reason: String },
    /// Nothing definitive within the simulation budget.
    Unknown { steps_used: u64, bits_cap_hit: bool },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub method: Method,
}

impl Verdict {
    pub fn converges(m: u64, method: Method) -> Self {
        Verdict {
            outcome: Outcome::Converges { m },
            method,
        }
    }

    pub fn does_not_converge(reason: impl Into<String>, method: Method) -> Self {
        Verdict {
            outcome: Outcome::DoesNotConverge {
                reason: reason.into(),
            },
            method,
        }
    }

    pub fn is_converges(&self) -> bool {
        matches!(self.outcome, Outcome::Converges { .. })
    }

    pub fn is_does_not_converge(&self) -> bool {
        matches!(self.outcome, Outcome::DoesNotConverge { .. })
    }

    /// `M` when converging.
    pub fn m(&self) -> Option<u64> {
        match self.outcome {
            Outcome::Converges { m } => Some(m),
            _ => None,
        }
    }

    /// `converges`, `does-not-converge` or `unknown`.
    pub fn label(&self) -> &'static str {
        match self.outcome {
            Outcome::Converges { .. } => "converges",
            Outcome::DoesNotConverge { .. } => "does-not-converge",
            Outcome::Unknown { .. } => "unknown",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;
    use proptest::prelude::*;

    fn rats(xs: &[&str]) -> Vec<Rational> {
        xs.iter().map(|x| rat(x)).collect()
    }

    fn family(a1: &str, a2: &str, a3: &str, d: &str, c: [&str; 3]) -> ThreeLagFamily {
        ThreeLagFamily {
            a1: rat(a1),
            a2: rat(a2),
            a3: rat(a3),
            d: rat(d),
            initials: c.map(rat),
        }
    }

    #[test]
    fn validate_linear() {
        let err = LinearRecurrence::homogeneous(rats(&["1", "0"]), rats(&["0", "1"])).unwrap_err();
        assert_eq!(err, ModelError::LeadingCoefficientZero);
        assert_eq!(err.to_string(), "a_L must be nonzero");

        assert!(LinearRecurrence::new(rats(&["1/2"]), rats(&["3"]), rat("1")).is_ok());

        assert_eq!(
            LinearRecurrence::homogeneous(rats(&["1", "1"]), rats(&["0"])).unwrap_err(),
            ModelError::InitialsLength { expected: 2, found: 1 }
        );
        assert_eq!(
            LinearRecurrence::homogeneous(vec![], vec![]).unwrap_err(),
            ModelError::ZeroOrder
        );
    }

    #[test]
    fn validate_polynomial() {
        // r[i] = r[i-3] with declared order 2.
        let err = PolynomialRecurrence::new(2, 1, [(vec![0, 0, 1], rat("1"))], rats(&["1", "1"]))
            .unwrap_err();
        assert_eq!(err, ModelError::LagExceedsOrder { lag: 3, order: 2 });
        assert_eq!(err.to_string(), "lag 3 exceeds order 2");

        let err = PolynomialRecurrence::new(1, 2, [(vec![3], rat("1"))], rats(&["1"])).unwrap_err();
        assert_eq!(err, ModelError::ExponentOutOfRange { exponent: 3, bound: 2 });

        let err = PolynomialRecurrence::new(2, 2, [(vec![2, 0], rat("1"))], rats(&["1", "1"]))
            .unwrap_err();
        assert_eq!(err, ModelError::DeepestLagUnused { order: 2 });

        let err = PolynomialRecurrence::new(2, 2, [(vec![1], rat("1"))], rats(&["1", "1"]))
            .unwrap_err();
        assert_eq!(err, ModelError::ExponentVectorLength { expected: 2, found: 1 });

        let err = PolynomialRecurrence::new(1, 2, [(vec![2], rat("1"))], rats(&["1", "2"]))
            .unwrap_err();
        assert_eq!(err, ModelError::InitialsLength { expected: 1, found: 2 });
    }

    #[test]
    fn linear_steps() {
        let fib = LinearRecurrence::homogeneous(rats(&["1", "1"]), rats(&["0", "1"])).unwrap();
        assert_eq!(fib.step(&rats(&["1", "1"])).unwrap(), rat("2"));

        let half = LinearRecurrence::new(rats(&["1/2"]), rats(&["2"]), rat("1")).unwrap();
        assert_eq!(half.step(&rats(&["2"])).unwrap(), rat("2"));

        let avg = LinearRecurrence::homogeneous(rats(&["1/2", "1/2"]), rats(&["3", "3"])).unwrap();
        assert_eq!(avg.step(&rats(&["3", "3"])).unwrap(), rat("3"));

        assert_eq!(
            fib.step(&rats(&["1"])).unwrap_err(),
            ModelError::WindowLength { expected: 2, found: 1 }
        );
    }

    #[test]
    fn polynomial_steps() {
        let rec = family("1", "1", "0", "0", ["0", "0", "0"]).recurrence();
        // 1*(3 - 1) + 1*2^2
        assert_eq!(rec.step(&rats(&["3", "2", "1"])).unwrap(), rat("6"));

        let square = PolynomialRecurrence::new(1, 2, [(vec![2], rat("1"))], rats(&["-1"])).unwrap();
        assert_eq!(square.step(&rats(&["-1"])).unwrap(), rat("1"));

        let constant = PolynomialRecurrence::new(
            1,
            1,
            [(vec![0], rat("7")), (vec![1], rat("0"))],
            rats(&["5"]),
        )
        .unwrap();
        assert_eq!(constant.step(&rats(&["-12/5"])).unwrap(), rat("7"));
        assert_eq!(constant.constant_term(), rat("7"));
    }

    #[test]
    fn as_polynomial_examples() {
        let fib = LinearRecurrence::homogeneous(rats(&["1", "1"]), rats(&["0", "1"])).unwrap();
        let p = fib.as_polynomial();
        assert_eq!(p.degree_bound(), 1);
        assert_eq!(p.terms().len(), 2);
        assert_eq!(p.coeff(&[1, 0]), rat("1"));
        assert_eq!(p.coeff(&[0, 1]), rat("1"));

        let half = LinearRecurrence::new(rats(&["1/2"]), rats(&["3"]), rat("1")).unwrap();
        let p = half.as_polynomial();
        let expected: BTreeMap<Vec<u32>, Rational> =
            [(vec![1], rat("1/2")), (vec![0], rat("1"))].into_iter().collect();
        assert_eq!(p.terms(), &expected);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn trajectory_is_deterministic() {
        let rec = family("1/2", "-1/3", "1/5", "2", ["1", "-2", "1/2"]).recurrence();
        let a = rec.trajectory(12);
        let b = rec.trajectory(12);
        assert_eq!(a, b);
        assert_eq!(&a[..3], &rats(&["1", "-2", "1/2"])[..]);
        assert_eq!(rec.trajectory(2), rats(&["1", "-2"]));
    }

    #[test]
    fn family_round_trip() {
        let f = family("1/2", "0", "3", "-1", ["1", "2", "3"]);
        let rec = f.recurrence();
        assert_eq!(ThreeLagFamily::from_polynomial(&rec), Some(f));

        let square = PolynomialRecurrence::new(1, 2, [(vec![2], rat("1"))], rats(&["-1"])).unwrap();
        assert_eq!(ThreeLagFamily::from_polynomial(&square), None);

        let all_zero = family("0", "0", "0", "1", ["1", "1", "1"]).recurrence();
        assert!(all_zero.validate().is_ok());
        assert_eq!(all_zero.trajectory(6), rats(&["1", "1", "1", "1", "1", "1"]));
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-5i64..=5, 1i64..=3).prop_map(|(n, d)| Rational::new(n, d).unwrap())
    }

    fn linear_rec() -> impl Strategy<Value = LinearRecurrence> {
        (1usize..=4).prop_flat_map(|order| {
            (
                prop::collection::vec(small_rational(), order),
                prop::collection::vec(small_rational(), order),
                small_rational(),
            )
                .prop_filter_map("a_L = 0", |(a, c, d)| LinearRecurrence::new(a, c, d).ok())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn as_polynomial_preserves_steps(
            (rec, window) in linear_rec().prop_flat_map(|r| {
                let order = r.order();
                (Just(r), prop::collection::vec(small_rational(), order))
            })
        ) {
            let poly = rec.as_polynomial();
            prop_assert_eq!(rec.step(&window).unwrap(), poly.step(&window).unwrap());
            prop_assert_eq!(rec.constant_term(), poly.constant_term());
        }
    }

    #[test]
    fn method_serde_names_match_display() {
        for m in [
            Method::Theorem1,
            Method::Theorem2,
            Method::Theorem3,
            Method::Theorem4,
            Method::FixedPoint,
            Method::Oracle,
            Method::ConditionV,
        ] {
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
            assert_eq!(serde_json::from_str::<Method>(&json).unwrap(), m);
        }
    }
}

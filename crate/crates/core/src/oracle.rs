//! Exact forward simulation.
//!
//! The oracle is a semi-decision procedure: it can certify convergence but
//! never non-convergence. A run of `L` consecutive terms equal to `K`
//! continues forever exactly when `K` is a fixed point of the rule (the next
//! window is the same constant window), so `Converged` is only reported when
//! both hold.

use serde::Serialize;

use crate::analyzer::{decide_linear, decide_poly_zero, ConditionBreakdown};
use crate::model::{Method, Outcome, Recurrence, Rule, Verdict};
use crate::numeric::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OracleConfig {
    /// Terms generated beyond the initial values.
    pub max_steps: u64,
    /// Cap on numerator/denominator bit length of any term.
    pub max_bits: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_steps: 1000,
            max_bits: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum OracleOutcome {
    /// Every term from index `m` on equals the target. `prefix` runs through
    /// the end of the detected run.
    Converged { m: u64, prefix: Vec<Rational> },
    NotWithinBound { steps: u64 },
    /// Term `step` exceeded the bit cap with `bits` bits.
    Blowup { step: u64, bits: u64 },
}

impl OracleOutcome {
    pub fn is_converged(&self) -> bool {
        matches!(self, OracleOutcome::Converged { .. })
    }

    pub fn m(&self) -> Option<u64> {
        match self {
            OracleOutcome::Converged { m, .. } => Some(*m),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            OracleOutcome::Converged { .. } => "converged",
            OracleOutcome::NotWithinBound { .. } => "not-within-bound",
            OracleOutcome::Blowup { .. } => "blowup",
        }
    }
}

/// Smallest `m` such that every term of `terms[m..]` equals `target`.
fn first_index_of_tail(terms: &[Rational], target: &Rational) -> usize {
    terms
        .iter()
        .rposition(|t| t != target)
        .map_or(0, |p| p + 1)
}

/// Iterates `rec` exactly until convergence to `target` is certified or a
/// budget runs out.
pub fn simulate<R: Rule + ?Sized>(rec: &R, target: &Rational, cfg: &OracleConfig) -> OracleOutcome {
    let order = rec.order();
    let fixed_point = rec.fixed_point_residual(target).is_zero();
    let mut terms: Vec<Rational> = Vec::with_capacity(order + 64);
    let mut run = 0usize;

    let mut push = |terms: &mut Vec<Rational>, value: Rational| -> Option<OracleOutcome> {
        let bits = value.bits();
        if bits > cfg.max_bits {
            return Some(OracleOutcome::Blowup {
                step: terms.len() as u64,
                bits,
            });
        }
        run = if &value == target { run + 1 } else { 0 };
        terms.push(value);
        if fixed_point && run >= order {
            let m = first_index_of_tail(terms, target);
            return Some(OracleOutcome::Converged {
                m: m as u64,
                prefix: terms.clone(),
            });
        }
        None
    };

    for c in rec.initials() {
        if let Some(out) = push(&mut terms, c.clone()) {
            return out;
        }
    }
    let mut window = Vec::with_capacity(order);
    for _ in 0..cfg.max_steps {
        window.clear();
        window.extend(terms.iter().rev().take(order).cloned());
        let next = rec.step(&window).expect("window sized from order()");
        if let Some(out) = push(&mut terms, next) {
            return out;
        }
    }
    OracleOutcome::NotWithinBound {
        steps: cfg.max_steps,
    }
}

/// Everything the combined pipeline found out, for reporting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Analysis {
    pub verdict: Verdict,
    /// Theorem clauses, for linear inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<ConditionBreakdown>,
    /// `step(K..K) - K`, for polynomial inputs that reach the fixed-point gate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_point_residual: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleOutcome>,
}

/// Linear: the theorems are final. Polynomial: target-zero gate, then the
/// fixed-point gate, then simulation.
pub fn analyze(rec: &Recurrence, target: &Rational, cfg: &OracleConfig) -> Analysis {
    let poly = match rec {
        Recurrence::Linear(lin) => {
            let (verdict, breakdown) = decide_linear(lin, target);
            return Analysis {
                verdict,
                breakdown: Some(breakdown),
                fixed_point_residual: None,
                oracle: None,
            };
        }
        Recurrence::Polynomial(p) => p,
    };

    if target.is_zero() {
        let gate = decide_poly_zero(poly);
        if gate.is_does_not_converge() {
            return Analysis {
                verdict: gate,
                breakdown: None,
                fixed_point_residual: None,
                oracle: None,
            };
        }
    }

    let residual = poly.fixed_point_residual(target);
    if !residual.is_zero() {
        return Analysis {
            verdict: Verdict::does_not_converge(
                format!("K is not a fixed point (residual {residual})"),
                Method::FixedPoint,
            ),
            breakdown: None,
            fixed_point_residual: Some(residual),
            oracle: None,
        };
    }

    let outcome = simulate(poly, target, cfg);
    let verdict = match &outcome {
        OracleOutcome::Converged { m, .. } => Verdict::converges(*m, Method::Oracle),
        OracleOutcome::NotWithinBound { steps } => Verdict {
            outcome: Outcome::Unknown {
                steps_used: *steps,
                bits_cap_hit: false,
            },
            method: Method::Oracle,
        },
        OracleOutcome::Blowup { step, .. } => Verdict {
            outcome: Outcome::Unknown {
                steps_used: *step,
                bits_cap_hit: true,
            },
            method: Method::Oracle,
        },
    };
    Analysis {
        verdict,
        breakdown: None,
        fixed_point_residual: Some(residual),
        oracle: Some(outcome),
    }
}

pub fn decide_combined(rec: &Recurrence, target: &Rational, cfg: &OracleConfig) -> Verdict {
    analyze(rec, target, cfg).verdict
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearRecurrence, PolynomialRecurrence, ThreeLagFamily};
    use crate::numeric::rat;

    fn rats(xs: &[&str]) -> Vec<Rational> {
        xs.iter().map(|x| rat(x)).collect()
    }

    fn square(coeff: &str, c0: &str) -> PolynomialRecurrence {
        PolynomialRecurrence::new(1, 2, [(vec![2], rat(coeff))], rats(&[c0])).unwrap()
    }

    fn fib() -> LinearRecurrence {
        LinearRecurrence::homogeneous(rats(&["1", "1"]), rats(&["0", "1"])).unwrap()
    }

    #[test]
    fn square_orbit_converges_late() {
        let out = simulate(&square("1", "-1"), &rat("1"), &OracleConfig::default());
        assert_eq!(
            out,
            OracleOutcome::Converged {
                m: 1,
                prefix: rats(&["-1", "1"])
            }
        );
    }

    #[test]
    fn fibonacci_hits_five_once() {
        let cfg = OracleConfig {
            max_steps: 100,
            ..OracleConfig::default()
        };
        assert!(fib().trajectory(8).contains(&rat("5")));
        assert_eq!(
            simulate(&fib(), &rat("5"), &cfg),
            OracleOutcome::NotWithinBound { steps: 100 }
        );
    }

    #[test]
    fn doubly_exponential_blows_up() {
        let cfg = OracleConfig {
            max_bits: 64,
            ..OracleConfig::default()
        };
        // 1, 2, 8, 128, 2^15, 2^31, 2^63, 2^127
        let out = simulate(&square("2", "1"), &rat("1"), &cfg);
        assert_eq!(out, OracleOutcome::Blowup { step: 7, bits: 128 });
    }

    #[test]
    fn run_without_fixed_point_is_not_convergence() {
        // r[i] = r[i-1] + r[i-2] - 1 from (0, 0): a run of two zeros, but
        // (0, 0) -> -1, so 0 is not a fixed point.
        let rec = PolynomialRecurrence::new(
            2,
            1,
            [(vec![1, 0], rat("1")), (vec![0, 1], rat("1")), (vec![0, 0], rat("-1"))],
            rats(&["0", "0"]),
        )
        .unwrap();
        let cfg = OracleConfig {
            max_steps: 20,
            ..OracleConfig::default()
        };
        assert!(!simulate(&rec, &rat("0"), &cfg).is_converged());
    }

    #[test]
    fn convergence_is_sound_when_resimulated() {
        let rec = square("1", "-1");
        let out = simulate(&rec, &rat("1"), &OracleConfig::default());
        let OracleOutcome::Converged { m, prefix } = out else {
            panic!("expected convergence");
        };
        let extended = rec.trajectory(prefix.len() + 1000);
        assert!(extended[m as usize..].iter().all(|t| t == &rat("1")));
    }

    #[test]
    fn combined_pipeline_examples() {
        let cfg = OracleConfig::default();
        let fam = ThreeLagFamily {
            a1: rat("0"),
            a2: rat("1"),
            a3: rat("0"),
            d: rat("0"),
            initials: [rat("1"), rat("1"), rat("1")],
        };
        let v = decide_combined(&Recurrence::Polynomial(fam.recurrence()), &rat("2"), &cfg);
        assert!(v.is_does_not_converge());
        assert_eq!(v.method, Method::FixedPoint);

        let v = decide_combined(&Recurrence::Polynomial(square("1", "-1")), &rat("1"), &cfg);
        assert_eq!(v, Verdict::converges(1, Method::Oracle));

        let v = decide_combined(&Recurrence::Linear(fib()), &rat("0"), &cfg);
        assert!(v.is_does_not_converge());
        assert_eq!(v.method, Method::Theorem1);
    }

    #[test]
    fn zero_target_gate_and_oracle() {
        let cfg = OracleConfig::default();
        let v = decide_combined(&Recurrence::Polynomial(square("1", "0")), &rat("0"), &cfg);
        assert_eq!(v, Verdict::converges(0, Method::Oracle));

        let with_d = PolynomialRecurrence::new(
            1,
            2,
            [(vec![2], rat("1")), (vec![0], rat("1"))],
            rats(&["0"]),
        )
        .unwrap();
        let v = decide_combined(&Recurrence::Polynomial(with_d), &rat("0"), &cfg);
        assert_eq!(v.method, Method::Theorem3);
        assert!(v.is_does_not_converge());
    }

    #[test]
    fn unknown_reports_budget() {
        // r = r^2 from 1/2 tends to 0 but never reaches it; denominators square.
        let cfg = OracleConfig {
            max_steps: 50,
            max_bits: 256,
        };
        let v = decide_combined(&Recurrence::Polynomial(square("1", "1/2")), &rat("0"), &cfg);
        assert_eq!(
            v.outcome,
            Outcome::Unknown {
                steps_used: 8,
                bits_cap_hit: true
            }
        );
    }
}

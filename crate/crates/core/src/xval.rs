//! Cross-validation sweeps: closed-form conditions against the oracle over
//! cartesian grids of rational parameters.
//!
//! Grid points are independent; results are collected in enumeration order
//! whether the sweep runs serially or on the rayon pool, so both modes give
//! identical reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{condition_v, decide_linear, ConditionBreakdown};
use crate::model::{LinearRecurrence, Method, ThreeLagFamily, Verdict};
use crate::numeric::Rational;
use crate::oracle::{simulate, OracleConfig, OracleOutcome};

pub const DEFAULT_INSTANCE_CAP: u64 = 100_000;

fn default_cap() -> u64 {
    DEFAULT_INSTANCE_CAP
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XvalError {
    #[error("grid has {size} instances, cap is {cap}")]
    GridTooLarge { size: u128, cap: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Serial,
    Parallel,
}

/// Linear grid: every `a_k` ranges over `coeffs`, every `c_i` over
/// `initials`. Instances with `a_L = 0` are skipped and not counted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearGrid {
    pub orders: Vec<usize>,
    pub coeffs: Vec<Rational>,
    pub initials: Vec<Rational>,
    pub constants: Vec<Rational>,
    pub targets: Vec<Rational>,
    #[serde(default = "default_cap")]
    pub cap: u64,
}

/// Grid over the three-lag family's eight parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionVGrid {
    pub a1: Vec<Rational>,
    pub a2: Vec<Rational>,
    pub a3: Vec<Rational>,
    pub d: Vec<Rational>,
    pub c0: Vec<Rational>,
    pub c1: Vec<Rational>,
    pub c2: Vec<Rational>,
    pub k: Vec<Rational>,
    #[serde(default = "default_cap")]
    pub cap: u64,
}

impl ConditionVGrid {
    /// Grid holding exactly one instance.
    pub fn singleton(family: &ThreeLagFamily, target: &Rational) -> Self {
        let [c0, c1, c2] = &family.initials;
        ConditionVGrid {
            a1: vec![family.a1.clone()],
            a2: vec![family.a2.clone()],
            a3: vec![family.a3.clone()],
            d: vec![family.d.clone()],
            c0: vec![c0.clone()],
            c1: vec![c1.clone()],
            c2: vec![c2.clone()],
            k: vec![target.clone()],
            cap: DEFAULT_INSTANCE_CAP,
        }
    }
}

/// Grid file contents, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSpec {
    Linear(LinearGrid),
    ConditionV(ConditionVGrid),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearInstance {
    pub coeffs: Vec<Rational>,
    pub initials: Vec<Rational>,
    pub constant: Rational,
    pub target: Rational,
}

impl LinearInstance {
    pub fn recurrence(&self) -> LinearRecurrence {
        LinearRecurrence::new(self.coeffs.clone(), self.initials.clone(), self.constant.clone())
            .expect("grid instances have a_L != 0")
    }

    /// Theorem verdict, its clauses, and the oracle outcome.
    pub fn evaluate(&self, cfg: &OracleConfig) -> (Verdict, ConditionBreakdown, OracleOutcome) {
        let rec = self.recurrence();
        let (verdict, breakdown) = decide_linear(&rec, &self.target);
        let outcome = simulate(&rec, &self.target, cfg);
        (verdict, breakdown, outcome)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleInstance {
    pub family: ThreeLagFamily,
    pub target: Rational,
}

impl ExampleInstance {
    pub fn evaluate(&self, cfg: &OracleConfig) -> (ConditionBreakdown, OracleOutcome) {
        let breakdown = condition_v(&self.family, &self.target);
        let outcome = simulate(&self.family.recurrence(), &self.target, cfg);
        (breakdown, outcome)
    }
}

/// Flat column view of an instance, for CSV output.
pub trait InstanceColumns {
    fn headers() -> Vec<&'static str>;
    fn fields(&self) -> Vec<String>;
}

fn join(values: &[Rational]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

impl InstanceColumns for LinearInstance {
    fn headers() -> Vec<&'static str> {
        vec!["order", "a", "c", "d", "K"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.coeffs.len().to_string(),
            join(&self.coeffs),
            join(&self.initials),
            self.constant.to_string(),
            self.target.to_string(),
        ]
    }
}

impl InstanceColumns for ExampleInstance {
    fn headers() -> Vec<&'static str> {
        vec!["a1", "a2", "a3", "d", "c0", "c1", "c2", "K"]
    }

    fn fields(&self) -> Vec<String> {
        let f = &self.family;
        [&f.a1, &f.a2, &f.a3, &f.d, &f.initials[0], &f.initials[1], &f.initials[2], &self.target]
            .iter()
            .map(|r| r.to_string())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepRow<I> {
    pub index: u64,
    pub instance: I,
    /// Whether the closed-form condition predicts convergence.
    pub condition: bool,
    pub method: Method,
    pub oracle: &'static str,
    pub oracle_m: Option<u64>,
    pub mismatch: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MismatchRecord<I> {
    pub index: u64,
    pub instance: I,
    pub breakdown: ConditionBreakdown,
    pub oracle: OracleOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepReport<I> {
    pub total: u64,
    pub condition_yes_oracle_converged: u64,
    pub condition_yes_oracle_other: u64,
    pub condition_no_oracle_converged: u64,
    pub condition_no_oracle_other: u64,
    /// Oracle ran out of steps or bits; included in the `*_other` counts.
    pub oracle_inconclusive: u64,
    pub mismatches: Vec<MismatchRecord<I>>,
    pub rows: Vec<SweepRow<I>>,
}

impl<I> SweepReport<I> {
    fn from_rows(evaluated: Vec<(SweepRow<I>, Option<MismatchRecord<I>>, bool)>) -> Self {
        let mut report = SweepReport {
            total: 0,
            condition_yes_oracle_converged: 0,
            condition_yes_oracle_other: 0,
            condition_no_oracle_converged: 0,
            condition_no_oracle_other: 0,
            oracle_inconclusive: 0,
            mismatches: Vec::new(),
            rows: Vec::with_capacity(evaluated.len()),
        };
        for (row, mismatch, inconclusive) in evaluated {
            report.total += 1;
            let converged = row.oracle_m.is_some();
            match (row.condition, converged) {
                (true, true) => report.condition_yes_oracle_converged += 1,
                (true, false) => report.condition_yes_oracle_other += 1,
                (false, true) => report.condition_no_oracle_converged += 1,
                (false, false) => report.condition_no_oracle_other += 1,
            }
            if inconclusive {
                report.oracle_inconclusive += 1;
            }
            report.mismatches.extend(mismatch);
            report.rows.push(row);
        }
        report
    }

    /// The tallies without per-instance data.
    pub fn summary(&self) -> SweepSummary {
        SweepSummary {
            total: self.total,
            condition_yes_oracle_converged: self.condition_yes_oracle_converged,
            condition_yes_oracle_other: self.condition_yes_oracle_other,
            condition_no_oracle_converged: self.condition_no_oracle_converged,
            condition_no_oracle_other: self.condition_no_oracle_other,
            oracle_inconclusive: self.oracle_inconclusive,
            mismatches: self.mismatches.len() as u64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SweepSummary {
    pub total: u64,
    pub condition_yes_oracle_converged: u64,
    pub condition_yes_oracle_other: u64,
    pub condition_no_oracle_converged: u64,
    pub condition_no_oracle_other: u64,
    pub oracle_inconclusive: u64,
    pub mismatches: u64,
}

/// Product of list lengths, `None` on overflow of `u128`.
fn product(lengths: impl IntoIterator<Item = usize>) -> Option<u128> {
    lengths
        .into_iter()
        .try_fold(1u128, |acc, n| acc.checked_mul(n as u128))
}

fn check_cap(size: u128, cap: u64) -> Result<u64, XvalError> {
    if size > u128::from(cap) {
        Err(XvalError::GridTooLarge { size, cap })
    } else {
        Ok(size as u64)
    }
}

/// Splits `index` into digits of the given radices, least significant first.
fn mixed_radix(mut index: u64, radices: &[usize]) -> Vec<usize> {
    radices
        .iter()
        .map(|&r| {
            let digit = (index % r as u64) as usize;
            index /= r as u64;
            digit
        })
        .collect()
}

fn run<T: Send, F>(count: u64, mode: Execution, f: F) -> Vec<T>
where
    F: Fn(u64) -> Option<T> + Sync + Send,
{
    match mode {
        Execution::Serial => (0..count).filter_map(f).collect(),
        Execution::Parallel => (0..count).into_par_iter().filter_map(f).collect(),
    }
}

impl LinearGrid {
    fn order_size(&self, order: usize) -> Option<u128> {
        let per_lag = product([self.coeffs.len(), self.initials.len()])?;
        let lags = per_lag.checked_pow(u32::try_from(order).ok()?)?;
        lags.checked_mul(product([self.constants.len(), self.targets.len()])?)
    }

    /// Raw cartesian size before `a_L = 0` filtering.
    pub fn size(&self) -> Option<u128> {
        self.orders
            .iter()
            .try_fold(0u128, |acc, &order| acc.checked_add(self.order_size(order)?))
    }

    fn instance(&self, mut index: u64) -> Option<LinearInstance> {
        for &order in &self.orders {
            let size = self.order_size(order).expect("checked in sweep") as u64;
            if index >= size {
                index -= size;
                continue;
            }
            let mut radices = vec![self.coeffs.len(); order];
            radices.extend(std::iter::repeat_n(self.initials.len(), order));
            radices.push(self.constants.len());
            radices.push(self.targets.len());
            let digits = mixed_radix(index, &radices);
            let coeffs: Vec<Rational> = digits[..order].iter().map(|&i| self.coeffs[i].clone()).collect();
            if order == 0 || coeffs[order - 1].is_zero() {
                return None;
            }
            return Some(LinearInstance {
                coeffs,
                initials: digits[order..2 * order]
                    .iter()
                    .map(|&i| self.initials[i].clone())
                    .collect(),
                constant: self.constants[digits[2 * order]].clone(),
                target: self.targets[digits[2 * order + 1]].clone(),
            });
        }
        None
    }
}

impl ConditionVGrid {
    fn lists(&self) -> [&Vec<Rational>; 8] {
        [&self.a1, &self.a2, &self.a3, &self.d, &self.c0, &self.c1, &self.c2, &self.k]
    }

    pub fn size(&self) -> Option<u128> {
        product(self.lists().iter().map(|l| l.len()))
    }

    fn instance(&self, index: u64) -> ExampleInstance {
        let lists = self.lists();
        let radices: Vec<usize> = lists.iter().map(|l| l.len()).collect();
        let digits = mixed_radix(index, &radices);
        let pick = |slot: usize| lists[slot][digits[slot]].clone();
        ExampleInstance {
            family: ThreeLagFamily {
                a1: pick(0),
                a2: pick(1),
                a3: pick(2),
                d: pick(3),
                initials: [pick(4), pick(5), pick(6)],
            },
            target: pick(7),
        }
    }
}

/// `decide_linear` against the oracle. A mismatch is a theorem `Converges`
/// without oracle convergence, or a theorem `DoesNotConverge` with it.
pub fn sweep_linear(
    grid: &LinearGrid,
    cfg: &OracleConfig,
    mode: Execution,
) -> Result<SweepReport<LinearInstance>, XvalError> {
    let size = grid.size().ok_or(XvalError::GridTooLarge {
        size: u128::MAX,
        cap: grid.cap,
    })?;
    let count = check_cap(size, grid.cap)?;
    let rows = run(count, mode, |index| {
        let instance = grid.instance(index)?;
        let (verdict, breakdown, outcome) = instance.evaluate(cfg);
        let converged = outcome.is_converged();
        let mismatch = (verdict.is_converges() && !converged) || (verdict.is_does_not_converge() && converged);
        let inconclusive = !converged;
        let row = SweepRow {
            index,
            instance: instance.clone(),
            condition: verdict.is_converges(),
            method: verdict.method,
            oracle: outcome.label(),
            oracle_m: outcome.m(),
            mismatch,
        };
        let record = mismatch.then_some(MismatchRecord {
            index,
            instance,
            breakdown,
            oracle: outcome,
        });
        Some((row, record, inconclusive))
    });
    Ok(SweepReport::from_rows(rows))
}

/// Condition V against the oracle on the three-lag family.
///
/// The oracle can only certify convergence, so the sole definitive
/// disagreement is "V false, oracle converged". Instances where the oracle
/// runs out of budget are tallied in `oracle_inconclusive`.
pub fn sweep_condition_v(
    grid: &ConditionVGrid,
    cfg: &OracleConfig,
    mode: Execution,
) -> Result<SweepReport<ExampleInstance>, XvalError> {
    let size = grid.size().ok_or(XvalError::GridTooLarge {
        size: u128::MAX,
        cap: grid.cap,
    })?;
    let count = check_cap(size, grid.cap)?;
    let rows = run(count, mode, |index| {
        let instance = grid.instance(index);
        let (breakdown, outcome) = instance.evaluate(cfg);
        let converged = outcome.is_converged();
        let mismatch = !breakdown.overall && converged;
        let row = SweepRow {
            index,
            instance: instance.clone(),
            condition: breakdown.overall,
            method: Method::ConditionV,
            oracle: outcome.label(),
            oracle_m: outcome.m(),
            mismatch,
        };
        let record = mismatch.then_some(MismatchRecord {
            index,
            instance,
            breakdown,
            oracle: outcome,
        });
        Some((row, record, !converged))
    });
    Ok(SweepReport::from_rows(rows))
}

//! The `.rec` text format.
//!
//! ```text
//! # Fibonacci
//! order = 2
//! init = 0, 1
//! target = 0
//! rule = 1*r[i-1] + 1*r[i-2]
//! ```
//!
//! One `key = value` per line, `#` starts a comment, LF or CRLF line endings.
//! `order`, `init` and `rule` are required, `target` is optional, and no key
//! may repeat. A rule is a `+`-separated list of terms; a term is a rational
//! coefficient optionally followed by `*`-separated factors `r[i-k]` or
//! `r[i-k]^e`. Coefficients are mandatory, so `r[i-1]` alone is rejected.
//!
//! Parsed rules are canonical: factors on the same lag are merged, factors
//! are sorted by lag, terms with the same monomial are merged, and terms are
//! sorted by their `(lag, exponent)` lists. [`render`] emits that order, so
//! `parse(render(f)) == f`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{LinearRecurrence, ModelError, PolynomialRecurrence, Recurrence};
use crate::numeric::{Rational, RationalParseError};

/// Largest accepted `order`.
pub const MAX_ORDER: usize = 1024;
/// Largest accepted total degree of a single term.
pub const MAX_TOTAL_DEGREE: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Factor {
    pub lag: usize,
    pub exponent: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Term {
    pub coeff: Rational,
    /// Empty for the constant term.
    pub factors: Vec<Factor>,
}

impl Term {
    pub fn total_degree(&self) -> u32 {
        self.factors.iter().map(|f| f.exponent).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecurrenceKind {
    Linear,
    Polynomial,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecurrenceFile {
    pub order: usize,
    pub initials: Vec<Rational>,
    pub rule: Vec<Term>,
    pub target: Option<Rational>,
}

impl RecurrenceFile {
    /// Puts `rule` in canonical form (see the module docs).
    pub fn canonicalize(&mut self) {
        let mut merged: BTreeMap<Vec<(usize, u32)>, Rational> = BTreeMap::new();
        for term in self.rule.drain(..) {
            let mut by_lag: BTreeMap<usize, u32> = BTreeMap::new();
            for f in &term.factors {
                *by_lag.entry(f.lag).or_default() += f.exponent;
            }
            let key: Vec<(usize, u32)> = by_lag.into_iter().collect();
            *merged.entry(key).or_default() += term.coeff;
        }
        self.rule = merged
            .into_iter()
            .map(|(key, coeff)| Term {
                coeff,
                factors: key
                    .into_iter()
                    .map(|(lag, exponent)| Factor { lag, exponent })
                    .collect(),
            })
            .collect();
    }

    /// Linear when no term has total degree above one.
    pub fn kind(&self) -> RecurrenceKind {
        if self.rule.iter().all(|t| t.total_degree() <= 1) {
            RecurrenceKind::Linear
        } else {
            RecurrenceKind::Polynomial
        }
    }

    /// Largest exponent appearing in the rule, at least 1.
    pub fn degree_bound(&self) -> u32 {
        self.rule
            .iter()
            .flat_map(|t| t.factors.iter().map(|f| f.exponent))
            .max()
            .unwrap_or(1)
            .max(1)
    }

    /// Builds the validated model value.
    pub fn to_recurrence(&self) -> Result<Recurrence, ModelError> {
        match self.kind() {
            RecurrenceKind::Linear => {
                let mut coeffs = vec![Rational::zero(); self.order];
                let mut constant = Rational::zero();
                for term in &self.rule {
                    match term.factors.as_slice() {
                        [] => constant += &term.coeff,
                        [f] => {
                            let slot = coeffs.get_mut(f.lag.wrapping_sub(1)).ok_or(
                                ModelError::LagExceedsOrder {
                                    lag: f.lag,
                                    order: self.order,
                                },
                            )?;
                            *slot += &term.coeff;
                        }
                        _ => unreachable!("linear terms have at most one factor"),
                    }
                }
                LinearRecurrence::new(coeffs, self.initials.clone(), constant).map(Recurrence::Linear)
            }
            RecurrenceKind::Polynomial => {
                let mut terms = Vec::with_capacity(self.rule.len());
                for term in &self.rule {
                    let mut exps = vec![0u32; self.order];
                    for f in &term.factors {
                        let slot = exps.get_mut(f.lag.wrapping_sub(1)).ok_or(
                            ModelError::LagExceedsOrder {
                                lag: f.lag,
                                order: self.order,
                            },
                        )?;
                        *slot += f.exponent;
                    }
                    terms.push((exps, term.coeff.clone()));
                }
                PolynomialRecurrence::new(self.order, self.degree_bound(), terms, self.initials.clone())
                    .map(Recurrence::Polynomial)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("invalid rational literal: {0}")]
    Rational(RationalParseError),
    #[error("order must be an integer in [1, {MAX_ORDER}]")]
    InvalidOrder,
    #[error("lag {lag} exceeds order {order}")]
    LagExceedsOrder { lag: usize, order: usize },
    #[error("lag must be at least 1")]
    LagZero,
    #[error("exponent must be at least 1")]
    ExponentZero,
    #[error("total degree {degree} exceeds bound {MAX_TOTAL_DEGREE}")]
    DegreeTooLarge { degree: u64 },
    #[error("`init` has {found} values, order is {expected}")]
    InitCount { expected: usize, found: usize },
    #[error("unexpected trailing input `{0}`")]
    TrailingGarbage(String),
}

/// Parse failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.kind)
    }
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn error_at(&self, column: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column,
            kind,
        }
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        self.error_at(self.column(), kind)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char, what: &'static str) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(ParseErrorKind::Expected(what)))
        }
    }

    /// Longest run of characters satisfying `pred`, starting here.
    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> (usize, String) {
        self.skip_ws();
        let start = self.column();
        let mut s = String::new();
        while let Some(c) = self.peek().filter(|&c| pred(c)) {
            s.push(c);
            self.pos += 1;
        }
        (start, s)
    }

    fn ident(&mut self) -> (usize, String) {
        self.take_while(|c| c.is_ascii_alphanumeric() || c == '_')
    }

    fn rational(&mut self) -> Result<Rational, ParseError> {
        let (column, text) = self.take_while(|c| c.is_ascii_digit() || c == '-' || c == '/');
        if text.is_empty() {
            return Err(self.error(ParseErrorKind::Expected("a rational literal")));
        }
        text.parse()
            .map_err(|e| self.error_at(column, ParseErrorKind::Rational(e)))
    }

    /// Unsigned integer; `None` on overflow.
    fn integer(&mut self, what: &'static str) -> Result<(usize, Option<u64>), ParseError> {
        let (column, digits) = self.take_while(|c| c.is_ascii_digit());
        if digits.is_empty() {
            return Err(self.error(ParseErrorKind::Expected(what)));
        }
        Ok((column, digits.parse().ok()))
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            let rest: String = self.chars[self.pos..].iter().collect();
            Err(self.error(ParseErrorKind::TrailingGarbage(rest)))
        }
    }
}

/// A lag as written, kept with its position until `order` is known.
struct PendingLag {
    lag: usize,
    line: usize,
    column: usize,
}

fn parse_factor(cur: &mut Cursor, lags: &mut Vec<PendingLag>) -> Result<Factor, ParseError> {
    let (column, name) = cur.ident();
    if name != "r" {
        return Err(cur.error_at(column, ParseErrorKind::Expected("`r[i-<k>]`")));
    }
    cur.expect('[', "`[`")?;
    let (icol, i) = cur.ident();
    if i != "i" {
        return Err(cur.error_at(icol, ParseErrorKind::Expected("`i`")));
    }
    cur.expect('-', "`-`")?;
    let (lag_col, lag) = cur.integer("a lag")?;
    let lag = match lag {
        Some(0) => return Err(cur.error_at(lag_col, ParseErrorKind::LagZero)),
        Some(l) => usize::try_from(l).unwrap_or(usize::MAX),
        None => usize::MAX,
    };
    lags.push(PendingLag {
        lag,
        line: cur.line,
        column: lag_col,
    });
    cur.expect(']', "`]`")?;
    let exponent = if cur.eat('^') {
        let (exp_col, e) = cur.integer("an exponent")?;
        match e {
            Some(0) => return Err(cur.error_at(exp_col, ParseErrorKind::ExponentZero)),
            Some(e) if e <= u64::from(MAX_TOTAL_DEGREE) => e as u32,
            Some(e) => return Err(cur.error_at(exp_col, ParseErrorKind::DegreeTooLarge { degree: e })),
            None => {
                return Err(cur.error_at(exp_col, ParseErrorKind::DegreeTooLarge { degree: u64::MAX }))
            }
        }
    } else {
        1
    };
    Ok(Factor { lag, exponent })
}

fn parse_rule(cur: &mut Cursor, lags: &mut Vec<PendingLag>) -> Result<Vec<Term>, ParseError> {
    let mut terms = Vec::new();
    loop {
        let term_col = {
            cur.skip_ws();
            cur.column()
        };
        let coeff = cur.rational()?;
        let mut factors = Vec::new();
        while cur.eat('*') {
            factors.push(parse_factor(cur, lags)?);
        }
        let degree: u64 = factors.iter().map(|f| u64::from(f.exponent)).sum();
        if degree > u64::from(MAX_TOTAL_DEGREE) {
            return Err(cur.error_at(term_col, ParseErrorKind::DegreeTooLarge { degree }));
        }
        terms.push(Term { coeff, factors });
        if !cur.eat('+') {
            break;
        }
    }
    cur.finish()?;
    Ok(terms)
}

fn parse_list(cur: &mut Cursor) -> Result<Vec<Rational>, ParseError> {
    let mut values = vec![cur.rational()?];
    while cur.eat(',') {
        values.push(cur.rational()?);
    }
    cur.finish()?;
    Ok(values)
}

/// Parses raw bytes, rejecting invalid UTF-8 with a position.
pub fn parse_bytes(bytes: &[u8]) -> Result<RecurrenceFile, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let line = 1 + valid.iter().filter(|&&b| b == b'\n').count();
            let line_start = valid.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let column = 1 + String::from_utf8_lossy(&valid[line_start..]).chars().count();
            Err(ParseError {
                line,
                column,
                kind: ParseErrorKind::InvalidUtf8,
            })
        }
    }
}

pub fn parse(text: &str) -> Result<RecurrenceFile, ParseError> {
    let mut order: Option<(usize, usize)> = None; // (value, line)
    let mut init: Option<(Vec<Rational>, usize, usize)> = None; // (values, line, column)
    let mut rule: Option<Vec<Term>> = None;
    let mut target: Option<Rational> = None;
    let mut seen: Vec<&'static str> = Vec::new();
    let mut lags: Vec<PendingLag> = Vec::new();
    let mut last_line = 1;

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let content = line.split('#').next().unwrap_or("");
        let mut cur = Cursor::new(content, line_no);
        if cur.at_end() {
            continue;
        }
        let (key_col, key) = cur.ident();
        let key: &'static str = match key.as_str() {
            "order" => "order",
            "init" => "init",
            "rule" => "rule",
            "target" => "target",
            "" => return Err(cur.error(ParseErrorKind::Expected("a key"))),
            other => return Err(cur.error_at(key_col, ParseErrorKind::UnknownKey(other.to_string()))),
        };
        if seen.contains(&key) {
            return Err(cur.error_at(key_col, ParseErrorKind::DuplicateKey(key.to_string())));
        }
        seen.push(key);
        cur.expect('=', "`=`")?;
        match key {
            "order" => {
                let (col, n) = cur.integer("an integer order")?;
                let n = n
                    .and_then(|n| usize::try_from(n).ok())
                    .filter(|&n| (1..=MAX_ORDER).contains(&n))
                    .ok_or_else(|| cur.error_at(col, ParseErrorKind::InvalidOrder))?;
                cur.finish()?;
                order = Some((n, line_no));
            }
            "init" => {
                cur.skip_ws();
                let col = cur.column();
                init = Some((parse_list(&mut cur)?, line_no, col));
            }
            "target" => {
                let k = cur.rational()?;
                cur.finish()?;
                target = Some(k);
            }
            "rule" => rule = Some(parse_rule(&mut cur, &mut lags)?),
            _ => unreachable!(),
        }
    }

    let missing = |key: &'static str| ParseError {
        line: last_line,
        column: 1,
        kind: ParseErrorKind::MissingKey(key),
    };
    let (order, _) = order.ok_or_else(|| missing("order"))?;
    let (initials, init_line, init_col) = init.ok_or_else(|| missing("init"))?;
    let rule = rule.ok_or_else(|| missing("rule"))?;

    if let Some(bad) = lags.iter().find(|l| l.lag > order) {
        return Err(ParseError {
            line: bad.line,
            column: bad.column,
            kind: ParseErrorKind::LagExceedsOrder { lag: bad.lag, order },
        });
    }
    if initials.len() != order {
        return Err(ParseError {
            line: init_line,
            column: init_col,
            kind: ParseErrorKind::InitCount {
                expected: order,
                found: initials.len(),
            },
        });
    }

    let mut file = RecurrenceFile {
        order,
        initials,
        rule,
        target,
    };
    file.canonicalize();
    Ok(file)
}

fn render_term(term: &Term) -> String {
    let mut s = term.coeff.to_string();
    for f in &term.factors {
        s.push_str(&format!("*r[i-{}]", f.lag));
        if f.exponent != 1 {
            s.push_str(&format!("^{}", f.exponent));
        }
    }
    s
}

/// Canonical text; LF line endings.
pub fn render(file: &RecurrenceFile) -> String {
    let mut canonical = file.clone();
    canonical.canonicalize();
    let mut out = format!("order = {}\n", canonical.order);
    let init: Vec<String> = canonical.initials.iter().map(ToString::to_string).collect();
    out.push_str(&format!("init = {}\n", init.join(", ")));
    if let Some(k) = &canonical.target {
        out.push_str(&format!("target = {k}\n"));
    }
    let terms: Vec<String> = canonical.rule.iter().map(render_term).collect();
    out.push_str(&format!("rule = {}\n", terms.join(" + ")));
    out
}

/// Writes a recurrence back out as a file value.
pub fn from_recurrence(rec: &Recurrence, target: Option<Rational>) -> RecurrenceFile {
    let poly = rec.as_polynomial();
    let rule = poly
        .terms()
        .iter()
        .map(|(exps, coeff)| Term {
            coeff: coeff.clone(),
            factors: exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(k, &e)| Factor {
                    lag: k + 1,
                    exponent: e,
                })
                .collect(),
        })
        .collect();
    let mut file = RecurrenceFile {
        order: crate::model::Rule::order(&poly),
        initials: crate::model::Rule::initials(&poly).to_vec(),
        rule,
        target,
    };
    file.canonicalize();
    file
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Rule, ThreeLagFamily};
    use crate::numeric::rat;
    use proptest::prelude::*;

    fn kind_of(err: Result<RecurrenceFile, ParseError>) -> ParseErrorKind {
        err.unwrap_err().kind
    }

    #[test]
    fn square_rule_is_polynomial() {
        let f = parse("order = 1\ninit = -1\nrule = 1*r[i-1]^2").unwrap();
        assert_eq!(f.kind(), RecurrenceKind::Polynomial);
        assert_eq!(f.order, 1);
        assert_eq!(f.degree_bound(), 2);
        let Recurrence::Polynomial(p) = f.to_recurrence().unwrap() else {
            panic!("expected polynomial");
        };
        assert_eq!(p.degree_bound(), 2);
        assert_eq!(p.initials(), &[rat("-1")]);
    }

    #[test]
    fn fibonacci_is_linear() {
        let f = parse("order = 2\ninit = 0, 1\nrule = 1*r[i-1] + 1*r[i-2]").unwrap();
        assert_eq!(f.kind(), RecurrenceKind::Linear);
        let Recurrence::Linear(l) = f.to_recurrence().unwrap() else {
            panic!("expected linear");
        };
        assert_eq!(l.coeffs(), &[rat("1"), rat("1")]);
        assert_eq!(l.initials(), &[rat("0"), rat("1")]);
        assert!(l.is_homogeneous());
        assert_eq!(f.target, None);
    }

    #[test]
    fn lag_beyond_order() {
        let err = parse("order = 1\ninit = 1\nrule = 1*r[i-2]").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::LagExceedsOrder { lag: 2, order: 1 });
        assert_eq!(err.kind.to_string(), "lag 2 exceeds order 1");
        assert_eq!((err.line, err.column), (3, 14));
    }

    #[test]
    fn comments_crlf_and_target() {
        let src = "# header\r\norder = 1 # one lag\r\n\r\ninit = 3\r\ntarget = -3/2\r\nrule = 1/2*r[i-1] + 1\r\n";
        let f = parse(src).unwrap();
        assert_eq!(f.target, Some(rat("-3/2")));
        assert_eq!(f.rule.len(), 2);
        assert!(f.rule[0].factors.is_empty());
    }

    #[test]
    fn error_kinds() {
        assert_eq!(
            kind_of(parse("order = 1\ninit = 1\nrule = 1\nfoo = 2")),
            ParseErrorKind::UnknownKey("foo".into())
        );
        assert_eq!(
            kind_of(parse("order = 1\norder = 1\ninit = 1\nrule = 1")),
            ParseErrorKind::DuplicateKey("order".into())
        );
        assert!(matches!(
            kind_of(parse("order = 1\ninit = 1/0\nrule = 1*r[i-1]")),
            ParseErrorKind::Rational(RationalParseError::ZeroDenominator(_))
        ));
        assert!(matches!(
            kind_of(parse("order = 1\ninit = 1\nrule = 1*r[i-1]^65")),
            ParseErrorKind::DegreeTooLarge { degree: 65 }
        ));
        assert!(matches!(
            kind_of(parse("order = 1\ninit = 1\nrule = 1*r[i-1]^40*r[i-1]^40")),
            ParseErrorKind::DegreeTooLarge { degree: 80 }
        ));
        assert_eq!(
            kind_of(parse("order = 1\ninit = 1\nrule = 1*r[i-1] foo")),
            ParseErrorKind::TrailingGarbage("foo".into())
        );
        assert_eq!(
            kind_of(parse("order = 2\ninit = 1\nrule = 1*r[i-2]")),
            ParseErrorKind::InitCount { expected: 2, found: 1 }
        );
        assert_eq!(kind_of(parse("order = 1\ninit = 1")), ParseErrorKind::MissingKey("rule"));
        assert_eq!(
            kind_of(parse("order = 1\ninit = 1\nrule = r[i-1]")),
            ParseErrorKind::Expected("a rational literal")
        );
        assert_eq!(
            kind_of(parse("order = 0\ninit = 1\nrule = 1")),
            ParseErrorKind::InvalidOrder
        );
        assert_eq!(
            kind_of(parse("order = 1\ninit = 1\nrule = 1*r[i-0]")),
            ParseErrorKind::LagZero
        );
        assert_eq!(
            kind_of(parse("order = 1\ninit = 1\nrule = 1*r[i-1]^0")),
            ParseErrorKind::ExponentZero
        );
        assert!(matches!(
            kind_of(parse("order = 99999999999999999999999\ninit = 1\nrule = 1")),
            ParseErrorKind::InvalidOrder
        ));
        assert!(matches!(
            kind_of(parse("order = 1\ninit = 1\nrule = 1*r[i-99999999999999999999999]")),
            ParseErrorKind::LagExceedsOrder { .. }
        ));
    }

    #[test]
    fn error_positions() {
        let err = parse("order = 1\ninit = 1\n  bogus = 2\nrule = 1").unwrap_err();
        assert_eq!((err.line, err.column), (3, 3));
        assert_eq!(err.to_string(), "line 3, column 3: unknown key `bogus`");

        let err = parse("order = 1\ninit = 1, 2/0\nrule = 1").unwrap_err();
        assert_eq!((err.line, err.column), (2, 11));
    }

    #[test]
    fn invalid_utf8_has_position() {
        let err = parse_bytes(b"order = 1\ninit = \xff\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::InvalidUtf8);
        assert_eq!((err.line, err.column), (2, 8));
    }

    #[test]
    fn canonical_merging() {
        let f = parse("order = 2\ninit = 1, 1\nrule = 2*r[i-2]*r[i-1] + 1*r[i-1]*r[i-2] + 3 + 1*r[i-1]*r[i-1]").unwrap();
        assert_eq!(f.rule.len(), 3);
        assert!(f.rule[0].factors.is_empty());
        assert_eq!(f.rule[1].factors, vec![Factor { lag: 1, exponent: 1 }, Factor { lag: 2, exponent: 1 }]);
        assert_eq!(f.rule[1].coeff, rat("3"));
        assert_eq!(f.rule[2].factors, vec![Factor { lag: 1, exponent: 2 }]);
    }

    #[test]
    fn render_round_trips() {
        let fib = parse("order = 2\ninit = 0, 1\nrule = 1*r[i-1] + 1*r[i-2]").unwrap();
        assert_eq!(render(&fib), "order = 2\ninit = 0, 1\nrule = 1*r[i-1] + 1*r[i-2]\n");
        assert_eq!(parse(&render(&fib)).unwrap(), fib);

        let fam = ThreeLagFamily {
            a1: rat("1"),
            a2: rat("1"),
            a3: rat("0"),
            d: rat("0"),
            initials: [rat("1"), rat("2"), rat("3")],
        };
        let file = from_recurrence(&Recurrence::Polynomial(fam.recurrence()), Some(rat("1")));
        let text = render(&file);
        let back = parse(&text).unwrap();
        assert_eq!(back, file);
        let Recurrence::Polynomial(p) = back.to_recurrence().unwrap() else {
            panic!("expected polynomial");
        };
        assert_eq!(ThreeLagFamily::from_polynomial(&p), Some(fam));
    }

    #[test]
    fn linear_with_zero_leading_coefficient() {
        let f = parse("order = 2\ninit = 1, 1\nrule = 1*r[i-1] + 0*r[i-2]").unwrap();
        assert_eq!(f.to_recurrence(), Err(ModelError::LeadingCoefficientZero));
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-20i64..=20, 1i64..=6).prop_map(|(n, d)| Rational::new(n, d).unwrap())
    }

    fn term(order: usize) -> impl Strategy<Value = Term> {
        (
            small_rational(),
            prop::collection::vec((1..=order, 1u32..=3).prop_map(|(lag, exponent)| Factor { lag, exponent }), 0..3),
        )
            .prop_map(|(coeff, factors)| Term { coeff, factors })
    }

    fn file() -> impl Strategy<Value = RecurrenceFile> {
        (1usize..=4).prop_flat_map(|order| {
            (
                prop::collection::vec(small_rational(), order),
                prop::collection::vec(term(order), 1..5),
                prop::option::of(small_rational()),
            )
                .prop_map(move |(initials, rule, target)| {
                    let mut f = RecurrenceFile {
                        order,
                        initials,
                        rule,
                        target,
                    };
                    f.canonicalize();
                    f
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn parse_inverts_render(f in file()) {
            let text = render(&f);
            prop_assert_eq!(parse(&text).unwrap(), f.clone());
            prop_assert_eq!(render(&f), text);
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let _ = parse_bytes(&bytes);
        }

        #[test]
        fn near_miss_text_never_panics(
            s in "(order|init|rule|target|r|\\[|\\]|i|-|\\^|\\*|\\+|=|,|/|[0-9]|#| |\n){0,60}"
        ) {
            if let Err(e) = parse(&s) {
                prop_assert!(e.line >= 1 && e.column >= 1);
            }
        }
    }
}

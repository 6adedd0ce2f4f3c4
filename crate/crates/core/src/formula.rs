//! PCTL state and path formulas: AST, parser, canonical printer and desugaring.
//!
//! Concrete syntax:
//!
//! ```text
//! state  := "true" | "false" | IDENT | "!" state | "(" state ")"
//!         | state "&" state | state "|" state | state "->" state
//!         | "P" REL PROB "[" path "]"
//! path   := "X" state | state "U" state | state "U<=" INT state
//!         | "F" state | "F<=" INT state
//! REL    := "<" | "<=" | ">" | ">="
//! ```
//!
//! `!` binds tightest, then `&`, then `|`, then `->` (right-associative).
//! Inside a path formula, a leading `X` or `F` is always an operator; write
//! `(X)` to refer to an atom with that name.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Comparison applied between a path probability and a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = ">=")]
    GreaterEq,
}

impl Relation {
    /// Exact comparison, strictness preserved.
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Less => value < threshold,
            Relation::LessEq => value <= threshold,
            Relation::Greater => value > threshold,
            Relation::GreaterEq => value >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Less => "<",
            Relation::LessEq => "<=",
            Relation::Greater => ">",
            Relation::GreaterEq => ">=",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateFormula {
    True,
    False,
    Atom(String),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
    Implies(Box<StateFormula>, Box<StateFormula>),
    Prob {
        rel: Relation,
        p: f64,
        path: Box<PathFormula>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathFormula {
    Next(StateFormula),
    BoundedUntil {
        left: StateFormula,
        bound: u32,
        right: StateFormula,
    },
    Until {
        left: StateFormula,
        right: StateFormula,
    },
    BoundedEventually {
        bound: u32,
        inner: StateFormula,
    },
    Eventually(StateFormula),
}

impl StateFormula {
    pub fn atom(name: impl Into<String>) -> Self {
        StateFormula::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: StateFormula) -> Self {
        StateFormula::Not(Box::new(inner))
    }

    pub fn and(lhs: StateFormula, rhs: StateFormula) -> Self {
        StateFormula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: StateFormula, rhs: StateFormula) -> Self {
        StateFormula::Or(Box::new(lhs), Box::new(rhs))
    }

    pub fn implies(lhs: StateFormula, rhs: StateFormula) -> Self {
        StateFormula::Implies(Box::new(lhs), Box::new(rhs))
    }

    pub fn prob(rel: Relation, p: f64, path: PathFormula) -> Self {
        StateFormula::Prob {
            rel,
            p,
            path: Box::new(path),
        }
    }

    /// Rewrites `F` and `F<=k` into until form. Boolean connectives are kept.
    pub fn desugar(&self) -> StateFormula {
        match self {
            StateFormula::True | StateFormula::False | StateFormula::Atom(_) => self.clone(),
            StateFormula::Not(a) => StateFormula::not(a.desugar()),
            StateFormula::And(a, b) => StateFormula::and(a.desugar(), b.desugar()),
            StateFormula::Or(a, b) => StateFormula::or(a.desugar(), b.desugar()),
            StateFormula::Implies(a, b) => StateFormula::implies(a.desugar(), b.desugar()),
            StateFormula::Prob { rel, p, path } => StateFormula::prob(*rel, *p, path.desugar()),
        }
    }

    /// Every atom name occurring in the formula, including inside path formulas.
    pub fn atom_names(&self) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        self.collect_atoms(&mut names);
        names
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            StateFormula::True | StateFormula::False => {}
            StateFormula::Atom(name) => {
                out.insert(name.clone());
            }
            StateFormula::Not(a) => a.collect_atoms(out),
            StateFormula::And(a, b) | StateFormula::Or(a, b) | StateFormula::Implies(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            StateFormula::Prob { path, .. } => match path.as_ref() {
                PathFormula::Next(a)
                | PathFormula::Eventually(a)
                | PathFormula::BoundedEventually { inner: a, .. } => a.collect_atoms(out),
                PathFormula::Until { left, right }
                | PathFormula::BoundedUntil { left, right, .. } => {
                    left.collect_atoms(out);
                    right.collect_atoms(out);
                }
            },
        }
    }

    fn is_primary(&self) -> bool {
        matches!(
            self,
            StateFormula::True
                | StateFormula::False
                | StateFormula::Atom(_)
                | StateFormula::Prob { .. }
        )
    }
}

impl PathFormula {
    pub fn desugar(&self) -> PathFormula {
        match self {
            PathFormula::Next(a) => PathFormula::Next(a.desugar()),
            PathFormula::BoundedUntil { left, bound, right } => PathFormula::BoundedUntil {
                left: left.desugar(),
                bound: *bound,
                right: right.desugar(),
            },
            PathFormula::Until { left, right } => PathFormula::Until {
                left: left.desugar(),
                right: right.desugar(),
            },
            PathFormula::BoundedEventually { bound, inner } => PathFormula::BoundedUntil {
                left: StateFormula::True,
                bound: *bound,
                right: inner.desugar(),
            },
            PathFormula::Eventually(inner) => PathFormula::Until {
                left: StateFormula::True,
                right: inner.desugar(),
            },
        }
    }
}

/// Free function forms, mirroring the method API.
pub fn desugar(f: &StateFormula) -> StateFormula {
    f.desugar()
}

pub fn atom_names(f: &StateFormula) -> BTreeSet<String> {
    f.atom_names()
}

// Canonical printing: binary connectives are always parenthesized, path
// operands are always parenthesized, so `parse(f.to_string()) == f`.

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::True => f.write_str("true"),
            StateFormula::False => f.write_str("false"),
            StateFormula::Atom(name) => f.write_str(name),
            StateFormula::Not(a) => {
                if a.is_primary() || matches!(a.as_ref(), StateFormula::Not(_)) {
                    write!(f, "!{a}")
                } else {
                    write!(f, "!({a})")
                }
            }
            StateFormula::And(a, b) => write!(f, "({a} & {b})"),
            StateFormula::Or(a, b) => write!(f, "({a} | {b})"),
            StateFormula::Implies(a, b) => write!(f, "({a} -> {b})"),
            StateFormula::Prob { rel, p, path } => write!(f, "P{rel}{p}[ {path} ]"),
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(a) => write!(f, "X ({a})"),
            PathFormula::BoundedUntil { left, bound, right } => {
                write!(f, "({left}) U<={bound} ({right})")
            }
            PathFormula::Until { left, right } => write!(f, "({left}) U ({right})"),
            PathFormula::BoundedEventually { bound, inner } => write!(f, "F<={bound} ({inner})"),
            PathFormula::Eventually(inner) => write!(f, "F ({inner})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected {found}, expected one of: {}", expected.join(", "))]
    Unexpected {
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("unexpected character {0:?}")]
    BadCharacter(char),
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(String),
    #[error("step bound must be a nonnegative integer, found {0}")]
    BadBound(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Rel(Relation),
    Not,
    And,
    Or,
    Arrow,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Minus,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Rel(r) => format!("`{r}`"),
            Tok::Not => "`!`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Minus => "`-`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'!' => {
                i += 1;
                Tok::Not
            }
            b'&' => {
                i += 1;
                Tok::And
            }
            b'|' => {
                i += 1;
                Tok::Or
            }
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b'[' => {
                i += 1;
                Tok::LBracket
            }
            b']' => {
                i += 1;
                Tok::RBracket
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    i += 2;
                    Tok::Arrow
                } else {
                    i += 1;
                    Tok::Minus
                }
            }
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                i += if eq { 2 } else { 1 };
                Tok::Rel(match (c, eq) {
                    (b'<', false) => Relation::Less,
                    (b'<', true) => Relation::LessEq,
                    (_, false) => Relation::Greater,
                    (_, true) => Relation::GreaterEq,
                })
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                Tok::Number(text[start..i].to_string())
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..i].to_string())
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('\u{fffd}');
                return Err(ParseError {
                    offset: i,
                    kind: ParseErrorKind::BadCharacter(ch),
                });
            }
        };
        out.push((start, tok));
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

const STATE_START: &[&str] = &["true", "false", "identifier", "`!`", "`(`", "`P`"];

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[idx].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            kind: ParseErrorKind::Unexpected {
                found: self.peek().describe(),
                expected: expected.to_vec(),
            },
        }
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn is_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    // implies := or ("->" implies)?
    fn state(&mut self) -> Result<StateFormula, ParseError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.state()?;
            return Ok(StateFormula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<StateFormula, ParseError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = StateFormula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<StateFormula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.unary()?;
            lhs = StateFormula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<StateFormula, ParseError> {
        if *self.peek() == Tok::Not {
            self.bump();
            return Ok(StateFormula::not(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<StateFormula, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.state()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if name == "P" && matches!(self.peek_at(1), Tok::Rel(_)) {
                    return self.probability();
                }
                self.bump();
                Ok(match name.as_str() {
                    "true" => StateFormula::True,
                    "false" => StateFormula::False,
                    _ => StateFormula::Atom(name),
                })
            }
            _ => Err(self.unexpected(STATE_START)),
        }
    }

    fn probability(&mut self) -> Result<StateFormula, ParseError> {
        self.bump(); // P
        let Tok::Rel(rel) = self.bump() else {
            unreachable!("caller checked for a relation token")
        };
        let p = self.probability_literal()?;
        self.expect(Tok::LBracket, "`[`")?;
        let path = self.path()?;
        self.expect(Tok::RBracket, "`]`")?;
        Ok(StateFormula::prob(rel, p, path))
    }

    fn probability_literal(&mut self) -> Result<f64, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Number(text) => {
                self.bump();
                let value: f64 = text.parse().map_err(|_| ParseError {
                    offset,
                    kind: ParseErrorKind::Unexpected {
                        found: format!("malformed number `{text}`"),
                        expected: vec!["probability"],
                    },
                })?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(ParseError {
                        offset,
                        kind: ParseErrorKind::ProbabilityOutOfRange(text),
                    });
                }
                Ok(value)
            }
            Tok::Minus => {
                self.bump();
                let text = match self.peek() {
                    Tok::Number(t) => format!("-{t}"),
                    _ => "-".to_string(),
                };
                Err(ParseError {
                    offset,
                    kind: ParseErrorKind::ProbabilityOutOfRange(text),
                })
            }
            _ => Err(self.unexpected(&["probability"])),
        }
    }

    fn bound(&mut self) -> Result<u32, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Number(text) => {
                self.bump();
                if !text.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(ParseError {
                        offset,
                        kind: ParseErrorKind::BadBound(text),
                    });
                }
                text.parse().map_err(|_| ParseError {
                    offset,
                    kind: ParseErrorKind::BadBound(text),
                })
            }
            Tok::Minus => {
                self.bump();
                let text = match self.peek() {
                    Tok::Number(t) => format!("-{t}"),
                    _ => "-".to_string(),
                };
                Err(ParseError {
                    offset,
                    kind: ParseErrorKind::BadBound(text),
                })
            }
            _ => Err(self.unexpected(&["step bound"])),
        }
    }

    /// Optional `<= INT` after `U` or `F`.
    fn optional_bound(&mut self) -> Result<Option<u32>, ParseError> {
        if *self.peek() == Tok::Rel(Relation::LessEq) {
            self.bump();
            return self.bound().map(Some);
        }
        Ok(None)
    }

    fn path(&mut self) -> Result<PathFormula, ParseError> {
        if self.is_ident("X") {
            self.bump();
            return Ok(PathFormula::Next(self.state()?));
        }
        if self.is_ident("F") {
            self.bump();
            let bound = self.optional_bound()?;
            let inner = self.state()?;
            return Ok(match bound {
                Some(bound) => PathFormula::BoundedEventually { bound, inner },
                None => PathFormula::Eventually(inner),
            });
        }
        let left = self.state()?;
        if !self.is_ident("U") {
            return Err(self.unexpected(&["`U`", "`U<=`", "`&`", "`|`", "`->`"]));
        }
        self.bump();
        let bound = self.optional_bound()?;
        let right = self.state()?;
        Ok(match bound {
            Some(bound) => PathFormula::BoundedUntil { left, bound, right },
            None => PathFormula::Until { left, right },
        })
    }
}

/// Parses a state formula. Whitespace between tokens is ignored.
pub fn parse(text: &str) -> Result<StateFormula, ParseError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let f = parser.state()?;
    if *parser.peek() != Tok::End {
        return Err(parser.unexpected(&["`&`", "`|`", "`->`", "end of input"]));
    }
    Ok(f)
}

impl std::str::FromStr for StateFormula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(name: &str) -> StateFormula {
        StateFormula::atom(name)
    }

    #[test]
    fn parses_fishery_formula() {
        let f = parse("P>=0.9[ safe U<=5 target ]").unwrap();
        assert_eq!(
            f,
            StateFormula::prob(
                Relation::GreaterEq,
                0.9,
                PathFormula::BoundedUntil {
                    left: a("safe"),
                    bound: 5,
                    right: a("target"),
                }
            )
        );
    }

    #[test]
    fn parses_constants() {
        assert_eq!(parse("true").unwrap(), StateFormula::True);
        assert_eq!(parse("  false ").unwrap(), StateFormula::False);
    }

    #[test]
    fn not_binds_tighter_than_and() {
        let f = parse("P<0.5[ X a ] & !b").unwrap();
        assert_eq!(
            f,
            StateFormula::and(
                StateFormula::prob(Relation::Less, 0.5, PathFormula::Next(a("a"))),
                StateFormula::not(a("b"))
            )
        );
    }

    #[test]
    fn precedence_and_associativity() {
        // & over |, | over ->, -> to the right
        let f = parse("a | b & c -> d -> e").unwrap();
        let expected = StateFormula::implies(
            StateFormula::or(a("a"), StateFormula::and(a("b"), a("c"))),
            StateFormula::implies(a("d"), a("e")),
        );
        assert_eq!(f, expected);
        let g = parse("a & b & c").unwrap();
        assert_eq!(
            g,
            StateFormula::and(StateFormula::and(a("a"), a("b")), a("c"))
        );
    }

    #[test]
    fn eventually_forms() {
        assert_eq!(
            parse("P>0.1[F<=3 goal]").unwrap(),
            StateFormula::prob(
                Relation::Greater,
                0.1,
                PathFormula::BoundedEventually {
                    bound: 3,
                    inner: a("goal")
                }
            )
        );
        assert_eq!(
            parse("P<=1[ F goal ]").unwrap(),
            StateFormula::prob(Relation::LessEq, 1.0, PathFormula::Eventually(a("goal")))
        );
        // whitespace inside the bounded operator is allowed
        assert_eq!(
            parse("P>=0.5[a U <= 2 b]").unwrap(),
            parse("P>=0.5[a U<=2 b]").unwrap()
        );
    }

    #[test]
    fn p_is_an_atom_unless_followed_by_relation() {
        assert_eq!(parse("P & Q").unwrap(), StateFormula::and(a("P"), a("Q")));
    }

    #[test]
    fn nested_probability() {
        let f = parse("P>=0.5[ P<0.2[X a] U b ]").unwrap();
        match f {
            StateFormula::Prob { path, .. } => match *path {
                PathFormula::Until { left, .. } => {
                    assert!(matches!(left, StateFormula::Prob { .. }))
                }
                other => panic!("unexpected path {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_probability_above_one() {
        let err = parse("P>=1.5[ X a ]").unwrap_err();
        assert_eq!(err.offset, 3);
        assert!(matches!(err.kind, ParseErrorKind::ProbabilityOutOfRange(_)));
        let err = parse("P>=-0.5[ X a ]").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::ProbabilityOutOfRange(_)));
    }

    #[test]
    fn rejects_bad_bounds() {
        let err = parse("P>=0.5[ a U<=-1 b ]").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::BadBound(_)));
        let err = parse("P>=0.5[ a U<=2.5 b ]").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::BadBound(_)));
        assert_eq!(err.offset, 13);
    }

    #[test]
    fn syntax_error_reports_offset_and_expected() {
        let err = parse("P>=[x]").unwrap_err();
        assert_eq!(err.offset, 3);
        match err.kind {
            ParseErrorKind::Unexpected { expected, .. } => {
                assert_eq!(expected, vec!["probability"])
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse("a &").unwrap_err();
        assert_eq!(err.offset, 3);
        assert!(parse("a b").is_err());
        assert!(parse("(a").is_err());
        assert!(parse("P>=0.5[ a ]").is_err());
        assert!(parse("a # b").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn desugar_rewrites_eventually() {
        let f = parse("P>=0.5[ F a ]").unwrap();
        assert_eq!(
            f.desugar(),
            StateFormula::prob(
                Relation::GreaterEq,
                0.5,
                PathFormula::Until {
                    left: StateFormula::True,
                    right: a("a")
                }
            )
        );
        let g = parse("P>=0.5[ F<=4 a ]").unwrap().desugar();
        assert_eq!(g, parse("P>=0.5[ true U<=4 a ]").unwrap());
        assert_eq!(a("a").desugar(), a("a"));
        // boolean sugar is retained
        let h = parse("a -> b | c").unwrap();
        assert_eq!(h.desugar(), h);
    }

    #[test]
    fn atom_names_collects_everywhere() {
        let f = parse("P>=0.9[ safe U<=5 target ]").unwrap();
        let names: Vec<_> = f.atom_names().into_iter().collect();
        assert_eq!(names, vec!["safe", "target"]);
        assert!(StateFormula::True.atom_names().is_empty());
        let g = parse("a & !a").unwrap();
        assert_eq!(g.atom_names().len(), 1);
    }

    fn has_sugar(f: &StateFormula) -> bool {
        match f {
            StateFormula::True | StateFormula::False | StateFormula::Atom(_) => false,
            StateFormula::Not(a) => has_sugar(a),
            StateFormula::And(a, b) | StateFormula::Or(a, b) | StateFormula::Implies(a, b) => {
                has_sugar(a) || has_sugar(b)
            }
            StateFormula::Prob { path, .. } => match path.as_ref() {
                PathFormula::Eventually(_) | PathFormula::BoundedEventually { .. } => true,
                PathFormula::Next(a) => has_sugar(a),
                PathFormula::Until { left, right }
                | PathFormula::BoundedUntil { left, right, .. } => {
                    has_sugar(left) || has_sugar(right)
                }
            },
        }
    }

    const RESERVED: &[&str] = &["true", "false", "P", "X", "F", "U"];

    fn ident() -> impl Strategy<Value = String> {
        "[A-Za-z_][A-Za-z0-9_]{0,5}".prop_filter("reserved", |s| !RESERVED.contains(&s.as_str()))
    }

    fn relation() -> impl Strategy<Value = Relation> {
        prop_oneof![
            Just(Relation::Less),
            Just(Relation::LessEq),
            Just(Relation::Greater),
            Just(Relation::GreaterEq)
        ]
    }

    fn state_formula() -> impl Strategy<Value = StateFormula> {
        let leaf = prop_oneof![
            Just(StateFormula::True),
            Just(StateFormula::False),
            ident().prop_map(StateFormula::Atom),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            let path = prop_oneof![
                inner.clone().prop_map(PathFormula::Next),
                (inner.clone(), 0u32..50, inner.clone()).prop_map(|(left, bound, right)| {
                    PathFormula::BoundedUntil { left, bound, right }
                }),
                (inner.clone(), inner.clone())
                    .prop_map(|(left, right)| PathFormula::Until { left, right }),
                (0u32..50, inner.clone())
                    .prop_map(|(bound, inner)| PathFormula::BoundedEventually { bound, inner }),
                inner.clone().prop_map(PathFormula::Eventually),
            ];
            prop_oneof![
                inner.clone().prop_map(StateFormula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| StateFormula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| StateFormula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| StateFormula::implies(a, b)),
                (relation(), 0.0f64..=1.0, path)
                    .prop_map(|(rel, p, path)| StateFormula::prob(rel, p, path)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(f in state_formula()) {
            let text = f.to_string();
            prop_assert_eq!(parse(&text).unwrap(), f);
        }

        #[test]
        fn desugar_is_idempotent(f in state_formula()) {
            let once = f.desugar();
            prop_assert_eq!(once.desugar(), once.clone());
            prop_assert!(!has_sugar(&once));
        }

        #[test]
        fn probabilities_above_one_are_rejected(p in 1.0001f64..1e6) {
            let text = format!("P>={p}[ X a ]");
            let is_range_error = matches!(
                parse(&text).unwrap_err().kind,
                ParseErrorKind::ProbabilityOutOfRange(_)
            );
            prop_assert!(is_range_error);
        }
    }
}

//! Slice predicates: a small boolean query language over dataset columns.
//!
//! ```text
//! expr    := and_expr ("or" and_expr)*
//! and_expr:= term ("and" term)*
//! term    := "(" expr ")" | column cmp literal | column "in" "[" literal ("," literal)* "]"
//! cmp     := "==" | "!=" | "<" | "<=" | ">" | ">="
//! ```
//!
//! Strings are double-quoted, numbers are decimal. Column names that are not
//! plain identifiers are written in backticks.

mod eval;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{eval_mask, eval_predicate, Slice};
pub use parser::{normalize_operators, parse_predicate, parse_unchecked, validate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredicateError {
    #[error("empty query")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("type mismatch on `{column}`: {detail}")]
    TypeMismatch { column: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CompareOp::Eq | CompareOp::Ne)
    }

    pub(crate) fn apply<T: PartialOrd>(self, a: T, b: T) -> bool {
        match self {
            CompareOp::Eq => a == b,
            CompareOp::Ne => a != b,
            CompareOp::Lt => a < b,
            CompareOp::Le => a <= b,
            CompareOp::Gt => a > b,
            CompareOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Number(f64),
    Text(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(x) => write!(f, "{x}"),
            Literal::Text(s) => {
                f.write_str("\"")?;
                for ch in s.chars() {
                    match ch {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

/// Predicate syntax tree. Parentheses only group; they leave no node behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    Compare {
        column: String,
        op: CompareOp,
        value: Literal,
    },
    InSet {
        column: String,
        values: Vec<Literal>,
    },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn compare(column: impl Into<String>, op: CompareOp, value: Literal) -> Self {
        Predicate::Compare {
            column: column.into(),
            op,
            value,
        }
    }

    pub fn num(column: impl Into<String>, op: CompareOp, value: f64) -> Self {
        Self::compare(column, op, Literal::Number(value))
    }

    pub fn text(column: impl Into<String>, op: CompareOp, value: impl Into<String>) -> Self {
        Self::compare(column, op, Literal::Text(value.into()))
    }

    pub fn and(self, other: Predicate) -> Self {
        Predicate::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Predicate) -> Self {
        Predicate::Or(Box::new(self), Box::new(other))
    }

    /// Left-nested conjunction of `parts`; `None` when empty.
    pub fn all(parts: impl IntoIterator<Item = Predicate>) -> Option<Self> {
        parts.into_iter().reduce(Predicate::and)
    }

    /// Canonical text form. `parse(render(p)) == p` for every valid tree.
    pub fn render(&self) -> String {
        self.to_string()
    }

    /// Number of criteria: count of `and` nodes plus one. `or` is not counted.
    pub fn count_criteria(&self) -> usize {
        fn ands(p: &Predicate) -> usize {
            match p {
                Predicate::And(a, b) => 1 + ands(a) + ands(b),
                Predicate::Or(a, b) => ands(a) + ands(b),
                _ => 0,
            }
        }
        ands(self) + 1
    }

    /// Names of every referenced column.
    pub fn columns(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for leaf in self.conditions() {
            match leaf {
                Predicate::Compare { column, .. } | Predicate::InSet { column, .. } => {
                    out.insert(column.as_str());
                }
                _ => unreachable!(),
            }
        }
        out
    }

    /// Leaf conditions (comparisons and set memberships) in left-to-right order.
    pub fn conditions(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        fn walk<'a>(p: &'a Predicate, out: &mut Vec<&'a Predicate>) {
            match p {
                Predicate::And(a, b) | Predicate::Or(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                leaf => out.push(leaf),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Leaf column name, for comparison and membership nodes.
    pub fn leaf_column(&self) -> Option<&str> {
        match self {
            Predicate::Compare { column, .. } | Predicate::InSet { column, .. } => Some(column),
            _ => None,
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !matches!(s, "and" | "or" | "in")
}

fn write_column(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    if is_identifier(name) {
        f.write_str(name)
    } else {
        write!(f, "`{name}`")
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, p: &Predicate) -> fmt::Result {
            match p {
                Predicate::And(..) | Predicate::Or(..) => write!(f, "({p})"),
                _ => write!(f, "{p}"),
            }
        }
        match self {
            Predicate::Compare { column, op, value } => {
                write_column(f, column)?;
                write!(f, " {} {value}", op.symbol())
            }
            Predicate::InSet { column, values } => {
                write_column(f, column)?;
                f.write_str(" in [")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Predicate::And(a, b) => {
                child(f, a)?;
                f.write_str(" and ")?;
                child(f, b)
            }
            Predicate::Or(a, b) => {
                child(f, a)?;
                f.write_str(" or ")?;
                child(f, b)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_canonically() {
        let p = Predicate::num("age", CompareOp::Ge, 72.0);
        assert_eq!(p.render(), "age >= 72");
        let q = Predicate::text("a", CompareOp::Eq, "x")
            .or(Predicate::num("b", CompareOp::Lt, 2.5))
            .and(Predicate::InSet {
                column: "c".into(),
                values: vec![Literal::Text("u\"v".into()), Literal::Number(-1.0)],
            });
        assert_eq!(q.render(), r#"(a == "x" or b < 2.5) and c in ["u\"v", -1]"#);
        assert_eq!(
            Predicate::num("imd band", CompareOp::Eq, 1.0).render(),
            "`imd band` == 1"
        );
    }

    #[test]
    fn counts_criteria() {
        let a = Predicate::num("a", CompareOp::Eq, 1.0);
        let b = Predicate::num("b", CompareOp::Eq, 2.0);
        let c = Predicate::num("c", CompareOp::Eq, 3.0);
        assert_eq!(a.count_criteria(), 1);
        assert_eq!(a.clone().and(b.clone()).count_criteria(), 2);
        assert_eq!(a.clone().and(b.clone()).and(c.clone()).count_criteria(), 3);
        assert_eq!(a.clone().or(b.clone()).count_criteria(), 1);
        assert_eq!(a.or(b).and(c).count_criteria(), 2);
    }
}

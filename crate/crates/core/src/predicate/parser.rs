use super::{CompareOp, Literal, Predicate, PredicateError};
use crate::dataset::{parse_bool_token, ColumnType, Dataset};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Op(CompareOp),
    And,
    Or,
    In,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> PredicateError {
    PredicateError::Syntax {
        offset,
        message: message.into(),
    }
}

impl<'a> Lexer<'a> {
    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, PredicateError> {
        let mut out = Vec::new();
        loop {
            while self.peek_char().is_some_and(char::is_whitespace) {
                self.bump();
            }
            let start = self.pos;
            let Some(c) = self.peek_char() else {
                out.push((Tok::End, start));
                return Ok(out);
            };
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                '[' => {
                    self.bump();
                    Tok::LBracket
                }
                ']' => {
                    self.bump();
                    Tok::RBracket
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '=' | '!' | '<' | '>' => self.operator(start)?,
                '"' | '\'' => self.string(start)?,
                '`' => self.quoted_ident(start)?,
                c if c.is_ascii_digit() || c == '-' || c == '.' => self.number(start)?,
                c if c.is_ascii_alphabetic() || c == '_' => {
                    while self
                        .peek_char()
                        .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
                    {
                        self.bump();
                    }
                    match &self.src[start..self.pos] {
                        "and" => Tok::And,
                        "or" => Tok::Or,
                        "in" => Tok::In,
                        word => Tok::Ident(word.to_string()),
                    }
                }
                other => return Err(syntax(start, format!("unexpected character `{other}`"))),
            };
            out.push((tok, start));
        }
    }

    fn operator(&mut self, start: usize) -> Result<Tok, PredicateError> {
        let first = self.bump().unwrap();
        let eq = self.peek_char() == Some('=');
        if eq {
            self.bump();
        }
        Ok(Tok::Op(match (first, eq) {
            ('=', true) => CompareOp::Eq,
            ('!', true) => CompareOp::Ne,
            ('<', true) => CompareOp::Le,
            ('>', true) => CompareOp::Ge,
            ('<', false) => CompareOp::Lt,
            ('>', false) => CompareOp::Gt,
            ('=', false) => return Err(syntax(start, "`=` is not an operator; use `==`")),
            _ => return Err(syntax(start, "expected `!=`")),
        }))
    }

    fn string(&mut self, start: usize) -> Result<Tok, PredicateError> {
        let quote = self.bump().unwrap();
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(syntax(start, "unterminated string")),
                Some('\\') => match self.bump() {
                    Some(c) => s.push(c),
                    None => return Err(syntax(start, "unterminated string")),
                },
                Some(c) if c == quote => return Ok(Tok::Str(s)),
                Some(c) => s.push(c),
            }
        }
    }

    fn quoted_ident(&mut self, start: usize) -> Result<Tok, PredicateError> {
        self.bump();
        let from = self.pos;
        while let Some(c) = self.bump() {
            if c == '`' {
                let name = &self.src[from..self.pos - 1];
                if name.is_empty() {
                    return Err(syntax(start, "empty column name"));
                }
                return Ok(Tok::Ident(name.to_string()));
            }
        }
        Err(syntax(start, "unterminated `quoted` column name"))
    }

    fn number(&mut self, start: usize) -> Result<Tok, PredicateError> {
        if self.peek_char() == Some('-') {
            self.bump();
        }
        let digits = |lx: &mut Self| {
            let from = lx.pos;
            while lx.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                lx.bump();
            }
            lx.pos > from
        };
        let mut any = digits(self);
        if self.peek_char() == Some('.') {
            self.bump();
            any |= digits(self);
        }
        if !any {
            return Err(syntax(start, "malformed number"));
        }
        if matches!(self.peek_char(), Some('e' | 'E')) {
            self.bump();
            if matches!(self.peek_char(), Some('+' | '-')) {
                self.bump();
            }
            if !digits(self) {
                return Err(syntax(start, "malformed exponent"));
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Tok::Number)
            .ok_or_else(|| syntax(start, "malformed number"))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), PredicateError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Predicate, PredicateError> {
        let mut left = self.and_expr()?;
        while *self.peek() == Tok::Or {
            self.next();
            left = left.or(self.and_expr()?);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Predicate, PredicateError> {
        let mut left = self.term()?;
        while *self.peek() == Tok::And {
            self.next();
            left = left.and(self.term()?);
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Predicate, PredicateError> {
        let at = self.offset();
        match self.next() {
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(column) => match self.next() {
                Tok::Op(op) => Ok(Predicate::Compare {
                    column,
                    op,
                    value: self.literal()?,
                }),
                Tok::In => {
                    self.expect(Tok::LBracket, "`[`")?;
                    let mut values = vec![self.literal()?];
                    while *self.peek() == Tok::Comma {
                        self.next();
                        values.push(self.literal()?);
                    }
                    self.expect(Tok::RBracket, "`]`")?;
                    Ok(Predicate::InSet { column, values })
                }
                _ => Err(syntax(
                    self.toks[self.at.saturating_sub(1)].1,
                    "expected comparison operator or `in`",
                )),
            },
            _ => Err(syntax(at, "expected column name or `(`")),
        }
    }

    fn literal(&mut self) -> Result<Literal, PredicateError> {
        let at = self.offset();
        match self.next() {
            Tok::Number(x) => Ok(Literal::Number(x)),
            Tok::Str(s) => Ok(Literal::Text(s)),
            _ => Err(syntax(at, "expected number or quoted string")),
        }
    }
}

/// Parses without checking columns against a schema.
pub fn parse_unchecked(text: &str) -> Result<Predicate, PredicateError> {
    if text.trim().is_empty() {
        return Err(PredicateError::Empty);
    }
    let toks = Lexer { src: text, pos: 0 }.tokens()?;
    let mut p = Parser { toks, at: 0 };
    let tree = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.offset(), "unexpected trailing input"));
    }
    Ok(tree)
}

/// Parses `text` and validates column references and operand types against `schema`.
pub fn parse_predicate(text: &str, schema: &Dataset) -> Result<Predicate, PredicateError> {
    let tree = parse_unchecked(text)?;
    validate(&tree, schema)?;
    Ok(tree)
}

fn check_literal(
    column: &str,
    kind: ColumnType,
    op: CompareOp,
    value: &Literal,
) -> Result<(), PredicateError> {
    let mismatch = |detail: String| PredicateError::TypeMismatch {
        column: column.to_string(),
        detail,
    };
    match (kind, value) {
        (ColumnType::Numeric, Literal::Number(_)) => Ok(()),
        (ColumnType::Numeric, Literal::Text(s)) => Err(mismatch(format!(
            "numeric column compared with string {s:?}"
        ))),
        (ColumnType::Categorical, _) if op.is_ordering() => Err(mismatch(format!(
            "operator `{}` is not defined on a categorical column",
            op.symbol()
        ))),
        (ColumnType::Categorical, _) => Ok(()),
        (ColumnType::Boolean, Literal::Number(x)) if *x == 0.0 || *x == 1.0 => Ok(()),
        (ColumnType::Boolean, Literal::Text(s))
            if !op.is_ordering() && (parse_bool_token(s).is_some() || yes_no(s).is_some()) =>
        {
            Ok(())
        }
        (ColumnType::Boolean, v) => Err(mismatch(format!(
            "boolean column compared with {v} using `{}`",
            op.symbol()
        ))),
    }
}

pub(crate) fn yes_no(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Checks every column reference and operand type of `tree` against `schema`.
pub fn validate(tree: &Predicate, schema: &Dataset) -> Result<(), PredicateError> {
    match tree {
        Predicate::And(a, b) | Predicate::Or(a, b) => {
            validate(a, schema)?;
            validate(b, schema)
        }
        Predicate::Compare { column, op, value } => {
            let col = schema
                .column(column)
                .ok_or_else(|| PredicateError::UnknownColumn(column.clone()))?;
            check_literal(column, col.column_type(), *op, value)
        }
        Predicate::InSet { column, values } => {
            let col = schema
                .column(column)
                .ok_or_else(|| PredicateError::UnknownColumn(column.clone()))?;
            if values.is_empty() {
                return Err(PredicateError::TypeMismatch {
                    column: column.clone(),
                    detail: "empty value list".into(),
                });
            }
            values
                .iter()
                .try_for_each(|v| check_literal(column, col.column_type(), CompareOp::Eq, v))
        }
    }
}

/// Rewrites `&&`/`||` outside string literals to `and`/`or`.
pub fn normalize_operators(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut quote: Option<char> = None;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if let Some(q) = quote {
            out.push(c);
            if c == '\\' {
                if let Some(n) = chars.next() {
                    out.push(n);
                }
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => {
                quote = Some(c);
                out.push(c);
            }
            '&' | '|' if chars.peek() == Some(&c) => {
                chars.next();
                while chars.peek().is_some_and(|n| n.is_whitespace()) {
                    chars.next();
                }
                out.truncate(out.trim_end().len());
                out.push_str(if c == '&' { " and " } else { " or " });
            }
            c => out.push(c),
        }
    }
    out
}

//! Recursive-descent parser for the expression DSL.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' exponent)?
//! base   := number | ident | func '(' expr ')' | '(' expr ')'
//! exponent := number | '-' number | '(' '-'? number ')'
//! ```
//!
//! Unary minus binds looser than `^`, so `-y1^2` is `-(y1^2)`.

use thiserror::Error;

use super::{Expression, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("undeclared identifier `{name}` at offset {offset}")]
    Undeclared { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::Undeclared { offset, .. } => *offset,
        }
    }
}

/// Parse `source`, accepting only identifiers listed in `declared`.
pub fn parse<S: AsRef<str>>(source: &str, declared: &[S]) -> Result<Expression, ParseError> {
    let mut p = Parser {
        src: source,
        pos: 0,
        declared: declared.iter().map(|s| s.as_ref()).collect(),
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    declared: Vec<&'a str>,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn error(&self, message: String) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message,
        }
    }

    fn unexpected(&mut self) -> ParseError {
        match self.peek() {
            Some(c) => self.error(format!("unexpected `{c}`")),
            None => self.error("unexpected end of input".into()),
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = lhs + self.term()?;
            } else if self.eat('-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat('*') {
                lhs = lhs * self.factor()?;
            } else if self.eat('/') {
                lhs = lhs / self.factor()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expression, ParseError> {
        if self.eat('-') {
            return Ok(-self.factor()?);
        }
        let base = self.base()?;
        if self.eat('^') {
            let exponent = self.exponent()?;
            Ok(base.powf(exponent))
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<f64, ParseError> {
        if self.eat('(') {
            let negative = self.eat('-');
            let v = self.number()?;
            self.expect(')')?;
            Ok(if negative { -v } else { v })
        } else {
            let negative = self.eat('-');
            let v = self.number()?;
            Ok(if negative { -v } else { v })
        }
    }

    fn base(&mut self) -> Result<Expression, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => Ok(Expression::constant(self.number()?)),
            Some(c) if c.is_alphabetic() || c == '_' => self.identifier(),
            _ => Err(self.unexpected()),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = &self.src[start..i];
        match text.parse::<f64>() {
            Ok(v) if !text.is_empty() => {
                self.pos = i;
                Ok(v)
            }
            _ => Err(self.error("expected a number".into())),
        }
    }

    fn identifier(&mut self) -> Result<Expression, ParseError> {
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .char_indices()
            .find(|(_, c)| !(c.is_alphanumeric() || *c == '_'))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        let name = &rest[..len];
        self.pos += len;
        if let Some(op) = UnaryOp::from_function_name(name) {
            if self.peek() != Some('(') {
                return Err(self.error(format!("function `{name}` requires `(`")));
            }
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(')')?;
            return Ok(Expression::unary(op, arg));
        }
        if !self.declared.contains(&name) {
            return Err(ParseError::Undeclared {
                name: name.to_string(),
                offset: start,
            });
        }
        Ok(Expression::var(name))
    }
}

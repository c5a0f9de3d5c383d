use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{BinaryOp, Expression, Node, UnaryOp};

/// Values for the free variables of an expression.
///
/// Lookups of names that were never bound are errors, never zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Binding {
    values: BTreeMap<String, f64>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<S: AsRef<str>> FromIterator<(S, f64)> for Binding {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Binding {
            values: iter
                .into_iter()
                .map(|(k, v)| (k.as_ref().to_string(), v))
                .collect(),
        }
    }
}

/// A point where an expression cannot be evaluated, carrying the offending
/// subexpression. Recoverable: samplers reject the point and move on.
#[derive(Debug, Clone)]
pub struct DomainViolation {
    pub subexpression: Expression,
    pub reason: &'static str,
}

impl fmt::Display for DomainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in `{}`", self.reason, self.subexpression)
    }
}

impl std::error::Error for DomainViolation {}

#[derive(Debug, Clone, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(String),
    #[error("domain violation: {0}")]
    Domain(DomainViolation),
}

impl From<DomainViolation> for EvalError {
    fn from(v: DomainViolation) -> Self {
        EvalError::Domain(v)
    }
}

pub(crate) fn apply_unary(op: UnaryOp, a: f64) -> Option<f64> {
    Some(match op {
        UnaryOp::Neg => -a,
        UnaryOp::Exp => a.exp(),
        UnaryOp::Ln => {
            if a <= 0.0 {
                return None;
            }
            a.ln()
        }
        UnaryOp::Sqrt => {
            if a < 0.0 {
                return None;
            }
            a.sqrt()
        }
        UnaryOp::Sin => a.sin(),
        UnaryOp::Cos => a.cos(),
        UnaryOp::Abs => a.abs(),
        UnaryOp::Sign => {
            if a == 0.0 {
                return None;
            }
            a.signum()
        }
    })
}

pub(crate) fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Option<f64> {
    Some(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return None;
            }
            a / b
        }
    })
}

pub(crate) fn apply_pow(base: f64, exponent: f64) -> Option<f64> {
    if base == 0.0 && exponent < 0.0 {
        return None;
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return None;
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        Some(base.powi(exponent as i32))
    } else {
        Some(base.powf(exponent))
    }
}

fn violation(e: &Expression, reason: &'static str) -> EvalError {
    EvalError::Domain(DomainViolation {
        subexpression: e.clone(),
        reason,
    })
}

impl Expression {
    /// Evaluate at `binding`. Non-finite intermediate results are reported as
    /// domain violations.
    pub fn eval(&self, binding: &Binding) -> Result<f64, EvalError> {
        let value = match self.node() {
            Node::Const(c) => *c,
            Node::Var(name) => binding
                .get(name)
                .ok_or_else(|| EvalError::Unbound(name.to_string()))?,
            Node::Unary(op, a) => {
                let a = a.eval(binding)?;
                apply_unary(*op, a).ok_or_else(|| violation(self, unary_reason(*op)))?
            }
            Node::Binary(op, a, b) => {
                let a = a.eval(binding)?;
                let b = b.eval(binding)?;
                apply_binary(*op, a, b).ok_or_else(|| violation(self, "division by zero"))?
            }
            Node::Pow(a, p) => {
                let a = a.eval(binding)?;
                apply_pow(a, *p).ok_or_else(|| violation(self, "invalid power"))?
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(violation(self, "non-finite value"))
        }
    }
}

pub(crate) fn unary_reason(op: UnaryOp) -> &'static str {
    match op {
        UnaryOp::Ln => "logarithm of a non-positive value",
        UnaryOp::Sqrt => "square root of a negative value",
        UnaryOp::Sign => "sign is undefined at zero",
        _ => "invalid argument",
    }
}

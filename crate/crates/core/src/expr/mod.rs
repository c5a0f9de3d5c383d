//! Scalar expressions over chart coordinates.
//!
//! An [`Expression`] is an immutable tree shared through `Arc`, so cloning is
//! cheap and derivative trees reuse the subtrees of their source. The smart
//! constructors fold constants and drop additive/multiplicative identities;
//! no other rewriting is performed.

mod diff;
mod dual;
mod eval;
mod parse;
mod print;

use std::collections::BTreeSet;
use std::sync::Arc;

pub use dual::{evaluate_dual, Dual};
pub use eval::{Binding, DomainViolation, EvalError};
pub use parse::{parse, ParseError};

/// Unary operators. `Sign` only arises from differentiating `abs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Abs,
    Sign,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Ln => "ln",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Abs => "abs",
            UnaryOp::Sign => "sign",
        }
    }

    pub(crate) fn from_function_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "ln" => UnaryOp::Ln,
            "sqrt" => UnaryOp::Sqrt,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "abs" => UnaryOp::Abs,
            "sign" => UnaryOp::Sign,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug)]
pub enum Node {
    Const(f64),
    Var(Arc<str>),
    Unary(UnaryOp, Expression),
    Binary(BinaryOp, Expression, Expression),
    /// Power with a real constant exponent.
    Pow(Expression, f64),
}

#[derive(Debug, Clone)]
pub struct Expression(Arc<Node>);

impl Expression {
    fn from_node(node: Node) -> Self {
        Expression(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(value: f64) -> Self {
        Self::from_node(Node::Const(value))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn var(name: &str) -> Self {
        Self::from_node(Node::Var(Arc::from(name)))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn unary(op: UnaryOp, arg: Expression) -> Self {
        if let Some(c) = arg.as_const() {
            if let Some(v) = eval::apply_unary(op, c).filter(|v| v.is_finite()) {
                return Self::constant(v);
            }
        }
        if op == UnaryOp::Neg {
            if let Node::Unary(UnaryOp::Neg, inner) = arg.node() {
                return inner.clone();
            }
        }
        Self::from_node(Node::Unary(op, arg))
    }

    pub fn binary(op: BinaryOp, lhs: Expression, rhs: Expression) -> Self {
        if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
            if let Some(v) = eval::apply_binary(op, a, b).filter(|v| v.is_finite()) {
                return Self::constant(v);
            }
        }
        match op {
            BinaryOp::Add => {
                if lhs.is_zero() {
                    return rhs;
                }
                if rhs.is_zero() {
                    return lhs;
                }
            }
            BinaryOp::Sub => {
                if rhs.is_zero() {
                    return lhs;
                }
                if lhs.is_zero() {
                    return Self::unary(UnaryOp::Neg, rhs);
                }
            }
            BinaryOp::Mul => {
                if lhs.is_zero() || rhs.is_zero() {
                    return Self::zero();
                }
                if lhs.is_one() {
                    return rhs;
                }
                if rhs.is_one() {
                    return lhs;
                }
            }
            BinaryOp::Div => {
                if lhs.is_zero() && !rhs.is_zero() {
                    return Self::zero();
                }
                if rhs.is_one() {
                    return lhs;
                }
            }
        }
        Self::from_node(Node::Binary(op, lhs, rhs))
    }

    pub fn powf(self, exponent: f64) -> Self {
        if exponent == 1.0 {
            return self;
        }
        if exponent == 0.0 {
            return Self::one();
        }
        if let Some(c) = self.as_const() {
            if let Some(v) = eval::apply_pow(c, exponent).filter(|v| v.is_finite()) {
                return Self::constant(v);
            }
        }
        Self::from_node(Node::Pow(self, exponent))
    }

    pub fn exp(self) -> Self {
        Self::unary(UnaryOp::Exp, self)
    }

    pub fn ln(self) -> Self {
        Self::unary(UnaryOp::Ln, self)
    }

    pub fn sqrt(self) -> Self {
        Self::unary(UnaryOp::Sqrt, self)
    }

    pub fn sin(self) -> Self {
        Self::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Self {
        Self::unary(UnaryOp::Cos, self)
    }

    pub fn abs(self) -> Self {
        Self::unary(UnaryOp::Abs, self)
    }

    pub fn sign(self) -> Self {
        Self::unary(UnaryOp::Sign, self)
    }

    /// Free variable names.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Var(name) => {
                out.insert(name.to_string());
            }
            Node::Unary(_, a) | Node::Pow(a, _) => a.collect_vars(out),
            Node::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Replace every occurrence of `name` by the constant `value`, refolding.
    pub fn substitute(&self, name: &str, value: f64) -> Expression {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(v) if &**v == name => Self::constant(value),
            Node::Var(_) => self.clone(),
            Node::Unary(op, a) => Self::unary(*op, a.substitute(name, value)),
            Node::Binary(op, a, b) => {
                Self::binary(*op, a.substitute(name, value), b.substitute(name, value))
            }
            Node::Pow(a, p) => a.substitute(name, value).powf(*p),
        }
    }

    /// Node count, counting shared subtrees once per occurrence.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Unary(_, a) | Node::Pow(a, _) => 1 + a.size(),
            Node::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Sum of a sequence of expressions; empty sums fold to zero.
    pub fn sum<I: IntoIterator<Item = Expression>>(terms: I) -> Expression {
        terms
            .into_iter()
            .fold(Expression::zero(), |acc, t| acc + t)
    }
}

impl From<f64> for Expression {
    fn from(value: f64) -> Self {
        Expression::constant(value)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl std::ops::$trait for Expression {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                Expression::binary($op, self, rhs)
            }
        }
        impl std::ops::$trait<&Expression> for &Expression {
            type Output = Expression;
            fn $method(self, rhs: &Expression) -> Expression {
                Expression::binary($op, self.clone(), rhs.clone())
            }
        }
        impl std::ops::$trait<f64> for Expression {
            type Output = Expression;
            fn $method(self, rhs: f64) -> Expression {
                Expression::binary($op, self, Expression::constant(rhs))
            }
        }
        impl std::ops::$trait<Expression> for f64 {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                Expression::binary($op, Expression::constant(self), rhs)
            }
        }
    };
}

impl_binop!(Add, add, BinaryOp::Add);
impl_binop!(Sub, sub, BinaryOp::Sub);
impl_binop!(Mul, mul, BinaryOp::Mul);
impl_binop!(Div, div, BinaryOp::Div);

impl std::ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::unary(UnaryOp::Neg, self)
    }
}

impl std::ops::Neg for &Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::unary(UnaryOp::Neg, self.clone())
    }
}

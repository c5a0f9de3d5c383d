//! Forward-mode evaluation with first-order dual numbers.
//!
//! This path never builds derivative trees, so it serves as an independent
//! check on [`Expression::partial`].

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::eval::{unary_reason, EvalError};
use super::{BinaryOp, Binding, DomainViolation, Expression, Node, UnaryOp};

/// `re + eps·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub const fn new(re: f64, eps: f64) -> Self {
        Dual { re, eps }
    }

    pub const fn constant(re: f64) -> Self {
        Dual { re, eps: 0.0 }
    }

    pub const fn variable(re: f64) -> Self {
        Dual { re, eps: 1.0 }
    }

    pub fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, e * self.eps)
    }

    pub fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.eps / self.re)
    }

    pub fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / (2.0 * s))
    }

    pub fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.re.cos() * self.eps)
    }

    pub fn cos(self) -> Self {
        Dual::new(self.re.cos(), -self.re.sin() * self.eps)
    }

    pub fn abs(self) -> Self {
        Dual::new(self.re.abs(), self.re.signum() * self.eps)
    }

    pub fn powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Dual::constant(1.0);
        }
        let (v, dv) = if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            let k = p as i32;
            (self.re.powi(k), p * self.re.powi(k - 1))
        } else {
            (self.re.powf(p), p * self.re.powf(p - 1.0))
        };
        Dual::new(v, dv * self.eps)
    }

    fn is_finite(self) -> bool {
        self.re.is_finite() && self.eps.is_finite()
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.eps * o.re + self.re * o.eps)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual::new(
            self.re / o.re,
            (self.eps * o.re - self.re * o.eps) / (o.re * o.re),
        )
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.eps)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(self, o: f64) -> Dual {
        Dual::new(self.re + o, self.eps)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, o: f64) -> Dual {
        Dual::new(self.re * o, self.eps * o)
    }
}

fn violation(e: &Expression, reason: &'static str) -> EvalError {
    EvalError::Domain(DomainViolation {
        subexpression: e.clone(),
        reason,
    })
}

fn eval_dual(e: &Expression, b: &Binding, seed: &str) -> Result<Dual, EvalError> {
    let out = match e.node() {
        Node::Const(c) => Dual::constant(*c),
        Node::Var(name) => {
            let v = b
                .get(name)
                .ok_or_else(|| EvalError::Unbound(name.to_string()))?;
            if &**name == seed {
                Dual::variable(v)
            } else {
                Dual::constant(v)
            }
        }
        Node::Unary(op, a) => {
            let a = eval_dual(a, b, seed)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Exp => a.exp(),
                UnaryOp::Ln if a.re <= 0.0 => return Err(violation(e, unary_reason(*op))),
                UnaryOp::Ln => a.ln(),
                UnaryOp::Sqrt if a.re < 0.0 => return Err(violation(e, unary_reason(*op))),
                UnaryOp::Sqrt => a.sqrt(),
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Abs if a.re == 0.0 && a.eps != 0.0 => {
                    return Err(violation(e, "non-differentiable at zero"))
                }
                UnaryOp::Sign if a.re == 0.0 => return Err(violation(e, unary_reason(*op))),
                UnaryOp::Abs => a.abs(),
                UnaryOp::Sign => Dual::constant(a.re.signum()),
            }
        }
        Node::Binary(op, l, r) => {
            let l = eval_dual(l, b, seed)?;
            let r = eval_dual(r, b, seed)?;
            match op {
                BinaryOp::Add => l + r,
                BinaryOp::Sub => l - r,
                BinaryOp::Mul => l * r,
                BinaryOp::Div if r.re == 0.0 => return Err(violation(e, "division by zero")),
                BinaryOp::Div => l / r,
            }
        }
        Node::Pow(a, p) => {
            let a = eval_dual(a, b, seed)?;
            if (a.re == 0.0 && *p < 0.0) || (a.re < 0.0 && p.fract() != 0.0) {
                return Err(violation(e, "invalid power"));
            }
            a.powf(*p)
        }
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(violation(e, "non-finite value"))
    }
}

/// Value and derivative with respect to `seed`, by dual-number propagation.
pub fn evaluate_dual(e: &Expression, b: &Binding, seed: &str) -> Result<(f64, f64), EvalError> {
    let d = eval_dual(e, b, seed)?;
    Ok((d.re, d.eps))
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    const VARS: [&str; 2] = ["x1", "y1"];

    #[test]
    fn square() {
        let e = parse("y1^2", &VARS).unwrap();
        let b = Binding::new().with("y1", 3.0).with("x1", 0.0);
        assert_eq!(evaluate_dual(&e, &b, "y1").unwrap(), (9.0, 6.0));
    }

    #[test]
    fn chain_rule_at_zero() {
        let e = parse("exp(2*x1)", &VARS).unwrap();
        let b = Binding::new().with("x1", 0.0);
        assert_eq!(evaluate_dual(&e, &b, "x1").unwrap(), (1.0, 2.0));
    }

    #[test]
    fn lienard_lagrangian() {
        let e = parse("(y1+2*x1)^2", &VARS).unwrap();
        let b = Binding::new().with("x1", 1.0).with("y1", 1.0);
        assert_eq!(evaluate_dual(&e, &b, "y1").unwrap(), (9.0, 6.0));
        assert_eq!(evaluate_dual(&e, &b, "x1").unwrap(), (9.0, 12.0));
    }

    #[test]
    fn domain_violations_match_plain_evaluation() {
        let e = parse("ln(x1)", &VARS).unwrap();
        let b = Binding::new().with("x1", -1.0);
        assert!(matches!(evaluate_dual(&e, &b, "x1"), Err(EvalError::Domain(_))));
        let e = parse("abs(x1)", &VARS).unwrap();
        let b = Binding::new().with("x1", 0.0).with("y1", 1.0);
        assert!(evaluate_dual(&e, &b, "x1").is_err());
        assert_eq!(evaluate_dual(&e, &b, "y1").unwrap(), (0.0, 0.0));
    }
}

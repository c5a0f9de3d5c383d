use super::{BinaryOp, Expression, Node, UnaryOp};

impl Expression {
    /// Exact symbolic partial derivative with respect to `var`.
    pub fn partial(&self, var: &str) -> Expression {
        match self.node() {
            Node::Const(_) => Expression::zero(),
            Node::Var(name) => {
                if &**name == var {
                    Expression::one()
                } else {
                    Expression::zero()
                }
            }
            Node::Unary(op, u) => {
                let du = u.partial(var);
                if du.is_zero() {
                    return Expression::zero();
                }
                let outer = match op {
                    UnaryOp::Neg => return -du,
                    UnaryOp::Exp => self.clone(),
                    UnaryOp::Ln => return du / u.clone(),
                    UnaryOp::Sqrt => return du / (2.0 * self.clone()),
                    UnaryOp::Sin => u.clone().cos(),
                    UnaryOp::Cos => -u.clone().sin(),
                    UnaryOp::Abs => u.clone().sign(),
                    // sign is piecewise constant; its singular point is kept
                    // by the factor that produced it.
                    UnaryOp::Sign => return Expression::zero(),
                };
                outer * du
            }
            Node::Binary(op, u, v) => {
                let du = u.partial(var);
                let dv = v.partial(var);
                match op {
                    BinaryOp::Add => du + dv,
                    BinaryOp::Sub => du - dv,
                    BinaryOp::Mul => du * v.clone() + u.clone() * dv,
                    BinaryOp::Div => {
                        if dv.is_zero() {
                            du / v.clone()
                        } else {
                            (du * v.clone() - u.clone() * dv) / v.clone().powf(2.0)
                        }
                    }
                }
            }
            Node::Pow(u, p) => {
                let du = u.partial(var);
                if du.is_zero() {
                    return Expression::zero();
                }
                *p * u.clone().powf(p - 1.0) * du
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Binding};

    const VARS: [&str; 6] = ["x1", "x2", "x3", "y1", "y2", "y3"];

    fn point() -> Binding {
        [
            ("x1", 0.3),
            ("x2", -0.7),
            ("x3", 1.1),
            ("y1", 2.0),
            ("y2", 1.0),
            ("y3", -0.5),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn power_rule() {
        let d = parse("y1^2+y2^2", &VARS).unwrap().partial("y1");
        assert_eq!(d.eval(&point()).unwrap(), 4.0);
        assert_eq!(d.to_string(), "(2 * y1)");
    }

    #[test]
    fn conformal_lagrangian_x_derivative() {
        let e = parse("0.5*exp(2*x1)*(y1^2+y2^2+y3^2)", &VARS).unwrap();
        let want = parse("exp(2*x1)*(y1^2+y2^2+y3^2)", &VARS).unwrap();
        let b = point();
        let got = e.partial("x1").eval(&b).unwrap();
        let expected = want.eval(&b).unwrap();
        assert!((got - expected).abs() <= 1e-14 * expected.abs());
    }

    #[test]
    fn independent_variable_is_zero() {
        assert!(parse("x2", &VARS).unwrap().partial("y1").is_zero());
        assert!(parse("exp(x2)*sin(x3)", &VARS).unwrap().partial("y1").is_zero());
    }

    #[test]
    fn abs_derivative_is_sign_and_singular_at_zero() {
        let e = parse("abs(y1 - 2)", &VARS).unwrap();
        let d = e.partial("y1");
        assert!(d.eval(&point()).is_err());
        let b = point().with("y1", 3.0);
        assert_eq!(d.eval(&b).unwrap(), 1.0);
    }

    #[test]
    fn quotient_and_chain() {
        let e = parse("ln(y1) / sqrt(x1 + y2^2)", &VARS).unwrap();
        let d = e.partial("y2").eval(&point()).unwrap();
        // d/dy2 [ln y1 (x1 + y2^2)^(-1/2)] = -ln y1 * y2 * (x1 + y2^2)^(-3/2)
        let want = -(2f64.ln()) * 1.0 * (1.3f64).powf(-1.5);
        assert!((d - want).abs() < 1e-14);
    }
}

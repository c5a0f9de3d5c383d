use std::fmt;

use super::{BinaryOp, Expression, Node, UnaryOp};

// Binary nodes are always parenthesized so the output re-parses to the same
// tree shape regardless of precedence.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write_const(f, *c),
            Node::Var(name) => f.write_str(name),
            Node::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                };
                write!(f, "({a} {sym} {b})")
            }
            Node::Pow(a, p) => {
                let atomic = match a.node() {
                    Node::Var(_) | Node::Binary(..) | Node::Unary(..) => true,
                    Node::Const(c) => *c >= 0.0,
                    Node::Pow(..) => false,
                };
                if atomic {
                    write!(f, "{a}")?;
                } else {
                    write!(f, "({a})")?;
                }
                if *p < 0.0 {
                    write!(f, "^(-{})", -p)
                } else {
                    write!(f, "^{p}")
                }
            }
        }
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c < 0.0 {
        write!(f, "(-{})", -c)
    } else {
        write!(f, "{c}")
    }
}

//! Printing in the input grammar, so output can be parsed back.

use std::fmt::{self, Display, Formatter, Write};

use num_complex::Complex64;

use super::{ComplexExpr, Coord, Node, Var};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const ATOM: u8 = 5;

fn precedence(e: &ComplexExpr) -> u8 {
    match e.node() {
        Node::Add(..) | Node::Sub(..) => SUM,
        Node::Mul(..) | Node::Div(..) => PRODUCT,
        Node::Neg(_) => UNARY,
        Node::Powi(..) => 4,
        Node::Const(c) => const_precedence(*c),
        Node::Var(_) | Node::Exp(_) | Node::Log(_) | Node::Conj(_) => ATOM,
    }
}

fn const_precedence(c: Complex64) -> u8 {
    if c.im == 0.0 && c.re < 0.0 {
        UNARY
    } else {
        ATOM
    }
}

fn write_const(f: &mut impl Write, c: Complex64) -> fmt::Result {
    match (c.re, c.im) {
        (re, 0.0) => write!(f, "{re}"),
        (0.0, 1.0) => f.write_str("i"),
        (0.0, im) => write!(f, "({im}*i)"),
        (re, im) if im < 0.0 => write!(f, "({re}-{}*i)", -im),
        (re, im) => write!(f, "({re}+{im}*i)"),
    }
}

fn write_var(f: &mut impl Write, v: Var) -> fmt::Result {
    let (name, k) = match v.coord {
        Coord::Base(k) => ('z', k + 1),
        Coord::Fiber(a) => ('u', a + 1),
    };
    if v.barred {
        write!(f, "conj({name}{k})")
    } else {
        write!(f, "{name}{k}")
    }
}

fn write_child(f: &mut impl Write, e: &ComplexExpr, min: u8) -> fmt::Result {
    if precedence(e) >= min {
        write_expr(f, e)
    } else {
        f.write_char('(')?;
        write_expr(f, e)?;
        f.write_char(')')
    }
}

fn write_expr(f: &mut impl Write, e: &ComplexExpr) -> fmt::Result {
    match e.node() {
        Node::Const(c) => write_const(f, *c),
        Node::Var(v) => write_var(f, *v),
        Node::Add(a, b) | Node::Sub(a, b) => {
            write_child(f, a, SUM)?;
            f.write_str(if matches!(e.node(), Node::Add(..)) { " + " } else { " - " })?;
            write_child(f, b, PRODUCT)
        }
        Node::Mul(a, b) | Node::Div(a, b) => {
            write_child(f, a, PRODUCT)?;
            f.write_char(if matches!(e.node(), Node::Mul(..)) { '*' } else { '/' })?;
            write_child(f, b, UNARY)
        }
        Node::Neg(a) => {
            f.write_char('-')?;
            write_child(f, a, UNARY)
        }
        Node::Powi(a, k) => {
            write_child(f, a, ATOM)?;
            write!(f, "^{k}")
        }
        Node::Exp(a) | Node::Log(a) | Node::Conj(a) => {
            f.write_str(match e.node() {
                Node::Exp(_) => "exp(",
                Node::Log(_) => "log(",
                _ => "conj(",
            })?;
            write_expr(f, a)?;
            f.write_char(')')
        }
    }
}

impl Display for ComplexExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

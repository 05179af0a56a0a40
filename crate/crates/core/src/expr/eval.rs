use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use super::{ComplexExpr, Coord, Node, Var};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of zero")]
    LogOfZero,
    #[error("expression references {var} but the point has only {available} such coordinates")]
    MissingCoordinate { var: &'static str, available: usize },
}

/// A point of the total space. Conjugate coordinates are always derived
/// from `z` and `u`, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub z: Vec<Complex64>,
    pub u: Vec<Complex64>,
}

impl EvalPoint {
    pub fn new(z: Vec<Complex64>, u: Vec<Complex64>) -> Self {
        EvalPoint { z, u }
    }

    pub fn value(&self, v: Var) -> Complex64 {
        let c = match v.coord {
            Coord::Base(k) => self.z[k],
            Coord::Fiber(a) => self.u[a],
        };
        if v.barred {
            c.conj()
        } else {
            c
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Instr {
    Const(Complex64),
    Load(Var),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Powi(u32, i32),
    Exp(u32),
    Log(u32),
    Conj(u32),
    Neg(u32),
}

/// A set of expressions compiled to straight-line code over a shared
/// register file. Common subexpressions are evaluated once.
#[derive(Debug, Clone)]
pub struct Tape {
    instrs: Vec<Instr>,
    outputs: Vec<u32>,
    max_base: usize,
    max_fiber: usize,
}

impl Tape {
    pub fn compile(exprs: &[ComplexExpr]) -> Tape {
        let mut tape = Tape { instrs: Vec::new(), outputs: Vec::new(), max_base: 0, max_fiber: 0 };
        let mut slots: HashMap<usize, u32> = HashMap::new();
        for e in exprs {
            let r = tape.emit(e, &mut slots);
            tape.outputs.push(r);
        }
        tape
    }

    // Iterative post-order so deep expressions cannot overflow the stack.
    fn emit(&mut self, root: &ComplexExpr, slots: &mut HashMap<usize, u32>) -> u32 {
        let mut stack: Vec<(ComplexExpr, bool)> = vec![(root.clone(), false)];
        while let Some((e, expanded)) = stack.pop() {
            if slots.contains_key(&e.id()) {
                continue;
            }
            if !expanded {
                stack.push((e.clone(), true));
                for c in e.children() {
                    if !slots.contains_key(&c.id()) {
                        stack.push((c.clone(), false));
                    }
                }
                continue;
            }
            let s = |c: &ComplexExpr| slots[&c.id()];
            let instr = match e.node() {
                Node::Const(c) => Instr::Const(*c),
                Node::Var(v) => {
                    match v.coord {
                        Coord::Base(k) => self.max_base = self.max_base.max(k + 1),
                        Coord::Fiber(a) => self.max_fiber = self.max_fiber.max(a + 1),
                    }
                    Instr::Load(*v)
                }
                Node::Add(a, b) => Instr::Add(s(a), s(b)),
                Node::Sub(a, b) => Instr::Sub(s(a), s(b)),
                Node::Mul(a, b) => Instr::Mul(s(a), s(b)),
                Node::Div(a, b) => Instr::Div(s(a), s(b)),
                Node::Powi(a, k) => Instr::Powi(s(a), *k),
                Node::Exp(a) => Instr::Exp(s(a)),
                Node::Log(a) => Instr::Log(s(a)),
                Node::Conj(a) => Instr::Conj(s(a)),
                Node::Neg(a) => Instr::Neg(s(a)),
            };
            let slot = u32::try_from(self.instrs.len()).expect("tape too large");
            self.instrs.push(instr);
            slots.insert(e.id(), slot);
        }
        slots[&root.id()]
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    fn check_dims(&self, n: usize, m: usize) -> Result<(), EvalError> {
        if self.max_base > n {
            return Err(EvalError::MissingCoordinate { var: "z", available: n });
        }
        if self.max_fiber > m {
            return Err(EvalError::MissingCoordinate { var: "u", available: m });
        }
        Ok(())
    }

    pub fn eval(&self, p: &EvalPoint) -> Result<Vec<Complex64>, EvalError> {
        self.check_dims(p.z.len(), p.u.len())?;
        let mut regs = vec![Complex64::new(0.0, 0.0); self.instrs.len()];
        for (i, instr) in self.instrs.iter().enumerate() {
            let r = |j: &u32| regs[*j as usize];
            regs[i] = match instr {
                Instr::Const(c) => *c,
                Instr::Load(v) => p.value(*v),
                Instr::Add(a, b) => r(a) + r(b),
                Instr::Sub(a, b) => r(a) - r(b),
                Instr::Mul(a, b) => r(a) * r(b),
                Instr::Div(a, b) => checked_div(r(a), r(b))?,
                Instr::Powi(a, k) => checked_powi(r(a), *k)?,
                Instr::Exp(a) => r(a).exp(),
                Instr::Log(a) => checked_ln(r(a))?,
                Instr::Conj(a) => r(a).conj(),
                Instr::Neg(a) => -r(a),
            };
        }
        Ok(self.outputs.iter().map(|&o| regs[o as usize]).collect())
    }

    /// Evaluates every output at a batch of points given column-wise:
    /// `z[k][j]` is coordinate `k` of point `j`. Results are written to
    /// `out[o][j]`. `scratch` is reused between calls.
    pub fn eval_batch(
        &self,
        z: &[Vec<Complex64>],
        u: &[Vec<Complex64>],
        scratch: &mut Vec<Complex64>,
        out: &mut [Vec<Complex64>],
    ) -> Result<(), EvalError> {
        self.check_dims(z.len(), u.len())?;
        let width = z.first().or(u.first()).map_or(1, Vec::len);
        scratch.clear();
        scratch.resize(self.instrs.len() * width, Complex64::new(0.0, 0.0));
        for (i, instr) in self.instrs.iter().enumerate() {
            let (done, rest) = scratch.split_at_mut(i * width);
            let dst = &mut rest[..width];
            let src = |j: &u32| &done[*j as usize * width..(*j as usize + 1) * width];
            match instr {
                Instr::Const(c) => dst.fill(*c),
                Instr::Load(v) => {
                    let col = match v.coord {
                        Coord::Base(k) => &z[k],
                        Coord::Fiber(a) => &u[a],
                    };
                    if v.barred {
                        dst.iter_mut().zip(col).for_each(|(d, c)| *d = c.conj());
                    } else {
                        dst.copy_from_slice(col);
                    }
                }
                Instr::Add(a, b) => zip2(dst, src(a), src(b), |x, y| x + y),
                Instr::Sub(a, b) => zip2(dst, src(a), src(b), |x, y| x - y),
                Instr::Mul(a, b) => zip2(dst, src(a), src(b), |x, y| x * y),
                Instr::Div(a, b) => {
                    let (xa, xb) = (src(a), src(b));
                    for j in 0..width {
                        dst[j] = checked_div(xa[j], xb[j])?;
                    }
                }
                Instr::Powi(a, k) => {
                    let xa = src(a);
                    for j in 0..width {
                        dst[j] = checked_powi(xa[j], *k)?;
                    }
                }
                Instr::Exp(a) => dst.iter_mut().zip(src(a)).for_each(|(d, x)| *d = x.exp()),
                Instr::Log(a) => {
                    let xa = src(a);
                    for j in 0..width {
                        dst[j] = checked_ln(xa[j])?;
                    }
                }
                Instr::Conj(a) => dst.iter_mut().zip(src(a)).for_each(|(d, x)| *d = x.conj()),
                Instr::Neg(a) => dst.iter_mut().zip(src(a)).for_each(|(d, x)| *d = -x),
            }
        }
        for (slot, o) in out.iter_mut().zip(&self.outputs) {
            let o = *o as usize;
            slot.clear();
            slot.extend_from_slice(&scratch[o * width..(o + 1) * width]);
        }
        Ok(())
    }
}

fn zip2(dst: &mut [Complex64], a: &[Complex64], b: &[Complex64], f: impl Fn(Complex64, Complex64) -> Complex64) {
    for ((d, x), y) in dst.iter_mut().zip(a).zip(b) {
        *d = f(*x, *y);
    }
}

fn checked_div(a: Complex64, b: Complex64) -> Result<Complex64, EvalError> {
    if b.re == 0.0 && b.im == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    Ok(a / b)
}

fn checked_powi(a: Complex64, k: i32) -> Result<Complex64, EvalError> {
    if k < 0 && a.re == 0.0 && a.im == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    Ok(a.powi(k))
}

fn checked_ln(a: Complex64) -> Result<Complex64, EvalError> {
    if a.re == 0.0 && a.im == 0.0 {
        return Err(EvalError::LogOfZero);
    }
    Ok(a.ln())
}

/// Evaluates `e` at `p` with principal-branch `log`.
pub fn eval_expr(e: &ComplexExpr, p: &EvalPoint) -> Result<Complex64, EvalError> {
    Ok(Tape::compile(std::slice::from_ref(e)).eval(p)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn pt(z: Complex64, u: Complex64) -> EvalPoint {
        EvalPoint::new(vec![z], vec![u])
    }

    #[test]
    fn modulus_squared() {
        let e = parse_expr("z1*conj(z1)", 1, 1).unwrap();
        let v = eval_expr(&e, &pt(Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0))).unwrap();
        assert_eq!(v, Complex64::new(25.0, 0.0));
    }

    #[test]
    fn fixture_b_finsler_value() {
        let e = parse_expr("exp(z1*conj(z1))*u1*conj(u1)", 1, 1).unwrap();
        let v = eval_expr(&e, &pt(Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0))).unwrap();
        assert!((v - Complex64::new(4.0 * std::f64::consts::E, 0.0)).norm() < 1e-12);
        assert!((v.re - 10.8731).abs() < 1e-4);
    }

    #[test]
    fn singular_inputs() {
        let e = parse_expr("1/u1", 1, 1).unwrap();
        let p = pt(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        assert_eq!(eval_expr(&e, &p), Err(EvalError::DivisionByZero));
        let l = parse_expr("log(u1)", 1, 1).unwrap();
        assert_eq!(eval_expr(&l, &p), Err(EvalError::LogOfZero));
        let q = parse_expr("u1^-2", 1, 1).unwrap();
        assert_eq!(eval_expr(&q, &p), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let e = parse_expr("u2", 1, 2).unwrap();
        let p = pt(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        assert!(matches!(eval_expr(&e, &p), Err(EvalError::MissingCoordinate { .. })));
    }

    #[test]
    fn batch_matches_pointwise() {
        let e = parse_expr("exp(-z1*conj(z1))*u1^2/(1+conj(u1))", 1, 1).unwrap();
        let f = parse_expr("log(2+z1)", 1, 1).unwrap();
        let tape = Tape::compile(&[e, f]);
        let zs: Vec<Complex64> = (0..7).map(|j| Complex64::new(0.1 * j as f64, -0.3)).collect();
        let us: Vec<Complex64> = (0..7).map(|j| Complex64::new(0.5, 0.2 * j as f64)).collect();
        let mut out = vec![Vec::new(), Vec::new()];
        let mut scratch = Vec::new();
        tape.eval_batch(std::slice::from_ref(&zs), std::slice::from_ref(&us), &mut scratch, &mut out).unwrap();
        for j in 0..7 {
            let single = tape.eval(&pt(zs[j], us[j])).unwrap();
            assert_eq!(single[0], out[0][j]);
            assert_eq!(single[1], out[1][j]);
        }
    }
}

//! Symbolic complex expressions over base coordinates `z^k`, fiber
//! coordinates `u^α` and their conjugates.
//!
//! Expressions are immutable, hash-consed DAGs: structurally identical
//! subtrees share one allocation, so equality and hashing are pointer
//! operations and memoized traversals (differentiation, compilation to a
//! [`Tape`]) see every distinct subexpression exactly once.
//!
//! Indices are 0-based in the API and 1-based in text (`z1` is base
//! coordinate 0).

mod diff;
mod display;
mod eval;
mod intern;
mod parse;

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

pub use diff::{fd_deriv, wirtinger_deriv, DiffCache};
pub use eval::{eval_expr, EvalError, EvalPoint, Tape};
pub use parse::{parse_expr, ParseError};

/// Which family a coordinate belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    Base(usize),
    Fiber(usize),
}

/// A coordinate or its complex conjugate. `z^k` and `z̄^k` are independent
/// variables for Wirtinger calculus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub coord: Coord,
    pub barred: bool,
}

impl Var {
    pub const fn z(k: usize) -> Self {
        Var { coord: Coord::Base(k), barred: false }
    }

    pub const fn zbar(k: usize) -> Self {
        Var { coord: Coord::Base(k), barred: true }
    }

    pub const fn u(alpha: usize) -> Self {
        Var { coord: Coord::Fiber(alpha), barred: false }
    }

    pub const fn ubar(alpha: usize) -> Self {
        Var { coord: Coord::Fiber(alpha), barred: true }
    }

    pub const fn new(coord: Coord, barred: bool) -> Self {
        Var { coord, barred }
    }

    pub const fn conj(self) -> Self {
        Var { coord: self.coord, barred: !self.barred }
    }

    /// Bit used in the per-node dependency mask. Indices past 15 share the
    /// overflow bit, which makes `depends_on` conservative for them.
    fn mask_bit(self) -> u64 {
        let slot = match self.coord {
            Coord::Base(k) if k < 15 => k,
            Coord::Fiber(a) if a < 15 => 16 + a,
            Coord::Base(_) => 15,
            Coord::Fiber(_) => 31,
        };
        1u64 << (2 * slot + usize::from(self.barred))
    }
}

const OVERFLOW_MASK: u64 = (0b11 << 30) | (0b11 << 62);
const BARRED_MASK: u64 = 0xAAAA_AAAA_AAAA_AAAA;

/// One node of an expression DAG. Children are themselves [`ComplexExpr`]s.
#[derive(Clone, Debug)]
pub enum Node {
    Const(Complex64),
    Var(Var),
    Add(ComplexExpr, ComplexExpr),
    Sub(ComplexExpr, ComplexExpr),
    Mul(ComplexExpr, ComplexExpr),
    Div(ComplexExpr, ComplexExpr),
    Powi(ComplexExpr, i32),
    Exp(ComplexExpr),
    Log(ComplexExpr),
    /// Only survives normalization around `log`, where pushing the
    /// conjugate inward would change the principal branch.
    Conj(ComplexExpr),
    Neg(ComplexExpr),
}

pub(crate) struct Inner {
    node: Node,
    vars: u64,
    has_conj: bool,
}

/// Immutable symbolic expression. Cloning is a reference-count bump.
#[derive(Clone)]
pub struct ComplexExpr(pub(crate) Arc<Inner>);

impl PartialEq for ComplexExpr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for ComplexExpr {}

impl Hash for ComplexExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id().hash(state);
    }
}

impl fmt::Debug for ComplexExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexExpr({self})")
    }
}

impl ComplexExpr {
    fn make(node: Node) -> Self {
        let (vars, has_conj) = match &node {
            Node::Const(_) => (0, false),
            Node::Var(v) => (v.mask_bit(), false),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                (a.0.vars | b.0.vars, a.0.has_conj || b.0.has_conj)
            }
            Node::Powi(a, _) | Node::Exp(a) | Node::Log(a) | Node::Neg(a) => (a.0.vars, a.0.has_conj),
            Node::Conj(a) => (swap_barred(a.0.vars), true),
        };
        intern::intern(Inner { node, vars, has_conj })
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// Stable for the lifetime of the expression; used as a memo key.
    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(c: Complex64) -> Self {
        // Normalize signed zeros so 0.0 and -0.0 intern to the same node.
        let c = Complex64::new(c.re + 0.0, c.im + 0.0);
        Self::make(Node::Const(c))
    }

    pub fn real(x: f64) -> Self {
        Self::constant(Complex64::new(x, 0.0))
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    pub fn one() -> Self {
        Self::real(1.0)
    }

    pub fn imag_unit() -> Self {
        Self::constant(Complex64::new(0.0, 1.0))
    }

    pub fn var(v: Var) -> Self {
        Self::make(Node::Var(v))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(Complex64::new(0.0, 0.0))
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(Complex64::new(1.0, 0.0))
    }

    /// False only if `v` provably does not occur in the expression.
    pub fn depends_on(&self, v: Var) -> bool {
        let bit = v.mask_bit();
        self.0.vars & bit != 0 || (bit & OVERFLOW_MASK != 0 && self.0.vars & OVERFLOW_MASK != 0)
    }

    /// True if any fiber coordinate (barred or not) occurs.
    pub fn depends_on_fiber(&self) -> bool {
        self.0.vars & 0xFFFF_FFFF_0000_0000 != 0
    }

    /// True iff the normalized expression is free of conjugated variables
    /// and `conj` nodes, and every barred Wirtinger derivative simplifies to
    /// zero.
    pub fn is_holomorphic(&self) -> bool {
        if self.0.has_conj || self.0.vars & BARRED_MASK != 0 {
            return false;
        }
        let cache = DiffCache::new();
        self.variables().into_iter().all(|v| wirtinger_deriv(self, v.conj(), &cache).is_zero())
    }

    /// Every variable occurring in the expression, sorted.
    pub fn variables(&self) -> Vec<Var> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        collect_vars(self, false, &mut seen, &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if seen.insert(e.id()) {
                stack.extend(e.children().into_iter().cloned());
            }
        }
        seen.len()
    }

    /// Number of nodes if the DAG were printed as a tree (saturating).
    pub fn tree_size(&self) -> u64 {
        fn go(e: &ComplexExpr, memo: &mut HashMap<usize, u64>) -> u64 {
            if let Some(&s) = memo.get(&e.id()) {
                return s;
            }
            let s = e.children().into_iter().fold(1u64, |acc, c| acc.saturating_add(go(c, memo)));
            memo.insert(e.id(), s);
            s
        }
        go(self, &mut HashMap::new())
    }

    pub(crate) fn children(&self) -> Vec<&ComplexExpr> {
        match self.node() {
            Node::Const(_) | Node::Var(_) => vec![],
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => vec![a, b],
            Node::Powi(a, _) | Node::Exp(a) | Node::Log(a) | Node::Conj(a) | Node::Neg(a) => vec![a],
        }
    }

    pub fn exp(&self) -> Self {
        if let Some(c) = self.as_const() {
            return Self::constant(c.exp());
        }
        Self::make(Node::Exp(self.clone()))
    }

    pub fn ln(&self) -> Self {
        if let Some(c) = self.as_const() {
            if c.norm_sqr() > 0.0 {
                return Self::constant(c.ln());
            }
        }
        Self::make(Node::Log(self.clone()))
    }

    pub fn powi(&self, k: i32) -> Self {
        match (k, self.node()) {
            (0, _) => Self::one(),
            (1, _) => self.clone(),
            (_, Node::Const(c)) if k > 0 || c.norm_sqr() > 0.0 => Self::constant(c.powi(k)),
            (_, Node::Powi(base, j)) => match j.checked_mul(k) {
                Some(jk) => base.powi(jk),
                None => Self::make(Node::Powi(self.clone(), k)),
            },
            _ => Self::make(Node::Powi(self.clone(), k)),
        }
    }

    /// Complex conjugate, pushed down to the leaves. `conj(conj(e))` is `e`.
    pub fn conj(&self) -> Self {
        conj_memo(self, &mut HashMap::new())
    }

    fn add_impl(&self, rhs: &Self) -> Self {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => return Self::constant(a + b),
            (Some(a), _) if a == Complex64::new(0.0, 0.0) => return rhs.clone(),
            (_, Some(b)) if b == Complex64::new(0.0, 0.0) => return self.clone(),
            _ => {}
        }
        if let Node::Neg(x) = rhs.node() {
            return self.sub_impl(x);
        }
        Self::make(Node::Add(self.clone(), rhs.clone()))
    }

    fn sub_impl(&self, rhs: &Self) -> Self {
        if self == rhs {
            return Self::zero();
        }
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => return Self::constant(a - b),
            (Some(a), _) if a == Complex64::new(0.0, 0.0) => return rhs.neg_impl(),
            (_, Some(b)) if b == Complex64::new(0.0, 0.0) => return self.clone(),
            _ => {}
        }
        if let Node::Neg(x) = rhs.node() {
            return self.add_impl(x);
        }
        Self::make(Node::Sub(self.clone(), rhs.clone()))
    }

    fn mul_impl(&self, rhs: &Self) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => return Self::constant(a * b),
            (Some(a), _) if a == zero => return Self::zero(),
            (_, Some(b)) if b == zero => return Self::zero(),
            (Some(a), _) if a == one => return rhs.clone(),
            (_, Some(b)) if b == one => return self.clone(),
            (Some(a), _) if a == -one => return rhs.neg_impl(),
            (_, Some(b)) if b == -one => return self.neg_impl(),
            _ => {}
        }
        match (self.node(), rhs.node()) {
            (Node::Neg(a), Node::Neg(b)) => a.mul_impl(b),
            (Node::Neg(a), _) => a.mul_impl(rhs).neg_impl(),
            (_, Node::Neg(b)) => self.mul_impl(b).neg_impl(),
            _ => Self::make(Node::Mul(self.clone(), rhs.clone())),
        }
    }

    fn div_impl(&self, rhs: &Self) -> Self {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) if b.norm_sqr() > 0.0 => return Self::constant(a / b),
            (_, Some(b)) if b == Complex64::new(1.0, 0.0) => return self.clone(),
            (Some(a), _) if a == Complex64::new(0.0, 0.0) => return Self::zero(),
            _ => {}
        }
        Self::make(Node::Div(self.clone(), rhs.clone()))
    }

    fn neg_impl(&self) -> Self {
        match self.node() {
            Node::Const(c) => Self::constant(-c),
            Node::Neg(x) => x.clone(),
            _ => Self::make(Node::Neg(self.clone())),
        }
    }
}

// A conj node depends on the conjugates of its argument's variables.
fn swap_barred(mask: u64) -> u64 {
    ((mask & BARRED_MASK) >> 1) | ((mask & !BARRED_MASK) << 1)
}

fn collect_vars(e: &ComplexExpr, flipped: bool, seen: &mut HashMap<(usize, bool), ()>, out: &mut Vec<Var>) {
    if seen.insert((e.id(), flipped), ()).is_some() {
        return;
    }
    match e.node() {
        Node::Var(v) => out.push(if flipped { v.conj() } else { *v }),
        Node::Conj(a) => collect_vars(a, !flipped, seen, out),
        _ => {
            for c in e.children() {
                collect_vars(c, flipped, seen, out);
            }
        }
    }
}

fn conj_memo(e: &ComplexExpr, memo: &mut HashMap<usize, ComplexExpr>) -> ComplexExpr {
    if e.0.vars == 0 && !e.0.has_conj {
        if let Some(c) = e.as_const() {
            return ComplexExpr::constant(c.conj());
        }
    }
    if let Some(r) = memo.get(&e.id()) {
        return r.clone();
    }
    let r = match e.node() {
        Node::Const(c) => ComplexExpr::constant(c.conj()),
        Node::Var(v) => ComplexExpr::var(v.conj()),
        Node::Add(a, b) => conj_memo(a, memo) + conj_memo(b, memo),
        Node::Sub(a, b) => conj_memo(a, memo) - conj_memo(b, memo),
        Node::Mul(a, b) => conj_memo(a, memo) * conj_memo(b, memo),
        Node::Div(a, b) => conj_memo(a, memo) / conj_memo(b, memo),
        Node::Powi(a, k) => conj_memo(a, memo).powi(*k),
        Node::Exp(a) => conj_memo(a, memo).exp(),
        Node::Neg(a) => -conj_memo(a, memo),
        Node::Conj(a) => a.clone(),
        Node::Log(_) => ComplexExpr::make(Node::Conj(e.clone())),
    };
    memo.insert(e.id(), r.clone());
    r
}

macro_rules! binop {
    ($trait:ident, $method:ident, $imp:ident) => {
        impl $trait<&ComplexExpr> for &ComplexExpr {
            type Output = ComplexExpr;
            fn $method(self, rhs: &ComplexExpr) -> ComplexExpr {
                self.$imp(rhs)
            }
        }
        impl $trait<ComplexExpr> for ComplexExpr {
            type Output = ComplexExpr;
            fn $method(self, rhs: ComplexExpr) -> ComplexExpr {
                self.$imp(&rhs)
            }
        }
        impl $trait<&ComplexExpr> for ComplexExpr {
            type Output = ComplexExpr;
            fn $method(self, rhs: &ComplexExpr) -> ComplexExpr {
                self.$imp(rhs)
            }
        }
        impl $trait<ComplexExpr> for &ComplexExpr {
            type Output = ComplexExpr;
            fn $method(self, rhs: ComplexExpr) -> ComplexExpr {
                self.$imp(&rhs)
            }
        }
    };
}

binop!(Add, add, add_impl);
binop!(Sub, sub, sub_impl);
binop!(Mul, mul, mul_impl);
binop!(Div, div, div_impl);

impl Neg for ComplexExpr {
    type Output = ComplexExpr;
    fn neg(self) -> ComplexExpr {
        self.neg_impl()
    }
}

impl Neg for &ComplexExpr {
    type Output = ComplexExpr;
    fn neg(self) -> ComplexExpr {
        self.neg_impl()
    }
}

impl From<f64> for ComplexExpr {
    fn from(x: f64) -> Self {
        ComplexExpr::real(x)
    }
}

impl From<Complex64> for ComplexExpr {
    fn from(c: Complex64) -> Self {
        ComplexExpr::constant(c)
    }
}

/// Sum of an iterator of expressions, left to right.
pub fn sum<I: IntoIterator<Item = ComplexExpr>>(terms: I) -> ComplexExpr {
    terms.into_iter().fold(ComplexExpr::zero(), |acc, t| acc + t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> ComplexExpr {
        ComplexExpr::var(Var::z(0))
    }

    #[test]
    fn hash_consing_shares_structure() {
        let a = z() * z().conj();
        let b = ComplexExpr::var(Var::z(0)) * ComplexExpr::var(Var::zbar(0));
        assert_eq!(a, b);
        assert!(Arc::ptr_eq(&a.0, &b.0));
    }

    #[test]
    fn light_simplification() {
        let x = z();
        assert_eq!(&x * ComplexExpr::one(), x);
        assert!((&x * ComplexExpr::zero()).is_zero());
        assert!((&x - &x).is_zero());
        assert_eq!(-(-x.clone()), x);
        assert_eq!(x.powi(2).powi(3), x.powi(6));
        assert!(ComplexExpr::zero().exp().is_one());
    }

    #[test]
    fn conj_normalization() {
        let x = z();
        assert_eq!(x.conj().conj(), x);
        let e = (x.clone() * ComplexExpr::imag_unit()).exp();
        let expected = (x.conj() * ComplexExpr::constant(Complex64::new(0.0, -1.0))).exp();
        assert_eq!(e.conj(), expected);
        // log keeps an explicit conj node
        let l = x.ln().conj();
        assert!(matches!(l.node(), Node::Conj(_)));
        assert_eq!(l.conj(), x.ln());
    }

    #[test]
    fn holomorphy_detection() {
        assert!(z().powi(2).is_holomorphic());
        assert!(!(z() * z().conj()).is_holomorphic());
        assert!(z().conj().conj().is_holomorphic());
        assert!(!z().ln().conj().is_holomorphic());
        assert!(ComplexExpr::real(5.0).is_holomorphic());
    }

    #[test]
    fn dependency_mask() {
        let e = z() * ComplexExpr::var(Var::ubar(1));
        assert!(e.depends_on(Var::z(0)));
        assert!(e.depends_on(Var::ubar(1)));
        assert!(!e.depends_on(Var::zbar(0)));
        assert!(!e.depends_on(Var::u(1)));
        assert!(e.depends_on_fiber());
        let big = ComplexExpr::var(Var::z(20));
        assert!(big.depends_on(Var::z(17)));
    }

    #[test]
    fn dag_vs_tree_size() {
        let mut e = z();
        for _ in 0..40 {
            e = &e * &e;
        }
        assert_eq!(e.dag_size(), 41);
        assert_eq!(e.tree_size(), (1u64 << 41) - 1);
    }
}

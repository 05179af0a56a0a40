use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;

use super::eval::{EvalError, EvalPoint, Tape};
use super::{ComplexExpr, Coord, Node, Var};

/// Memo table for Wirtinger derivatives, keyed by node identity.
///
/// Keys hold a clone of the differentiated node so its address stays valid
/// for as long as the entry exists. Share one cache across calls that
/// differentiate overlapping expressions.
#[derive(Default)]
pub struct DiffCache {
    map: Mutex<HashMap<(usize, Var), (ComplexExpr, ComplexExpr)>>,
}

impl DiffCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&self, e: &ComplexExpr, v: Var) -> Option<ComplexExpr> {
        self.map.lock().unwrap().get(&(e.id(), v)).map(|(_, d)| d.clone())
    }

    fn put(&self, e: &ComplexExpr, v: Var, d: &ComplexExpr) {
        self.map.lock().unwrap().insert((e.id(), v), (e.clone(), d.clone()));
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Debug for DiffCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffCache").field("entries", &self.len()).finish()
    }
}

/// Exact Wirtinger derivative `∂e/∂v`. A variable and its conjugate are
/// independent; `∂(conj e)/∂v = conj(∂e/∂v̄)`.
pub fn wirtinger_deriv(e: &ComplexExpr, v: Var, cache: &DiffCache) -> ComplexExpr {
    if !e.depends_on(v) {
        return ComplexExpr::zero();
    }
    if let Some(d) = cache.get(e, v) {
        return d;
    }
    let d = match e.node() {
        Node::Const(_) => ComplexExpr::zero(),
        Node::Var(w) => {
            if *w == v {
                ComplexExpr::one()
            } else {
                ComplexExpr::zero()
            }
        }
        Node::Add(a, b) => wirtinger_deriv(a, v, cache) + wirtinger_deriv(b, v, cache),
        Node::Sub(a, b) => wirtinger_deriv(a, v, cache) - wirtinger_deriv(b, v, cache),
        Node::Neg(a) => -wirtinger_deriv(a, v, cache),
        Node::Mul(a, b) => {
            let da = wirtinger_deriv(a, v, cache);
            let db = wirtinger_deriv(b, v, cache);
            da * b + a * db
        }
        Node::Div(a, b) => {
            let da = wirtinger_deriv(a, v, cache);
            let db = wirtinger_deriv(b, v, cache);
            if db.is_zero() {
                da / b
            } else {
                (da * b - a * db) / b.powi(2)
            }
        }
        Node::Powi(a, k) => {
            let da = wirtinger_deriv(a, v, cache);
            ComplexExpr::real(f64::from(*k)) * a.powi(k - 1) * da
        }
        Node::Exp(a) => e * wirtinger_deriv(a, v, cache),
        Node::Log(a) => wirtinger_deriv(a, v, cache) / a,
        Node::Conj(a) => wirtinger_deriv(a, v.conj(), cache).conj(),
    };
    cache.put(e, v, &d);
    d
}

/// Central-difference Wirtinger derivative at `p`:
/// `½(∂/∂x ∓ i ∂/∂y)` for the unbarred/barred variable, where `x + iy` is
/// the coordinate. Conjugate values are derived from the perturbed point.
pub fn fd_deriv(e: &ComplexExpr, v: Var, p: &EvalPoint, step: f64) -> Result<Complex64, EvalError> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let tape = Tape::compile(std::slice::from_ref(e));
    let shifted = |delta: Complex64| -> Result<Complex64, EvalError> {
        let mut q = p.clone();
        match v.coord {
            Coord::Base(k) => q.z[k] += delta,
            Coord::Fiber(a) => q.u[a] += delta,
        }
        Ok(tape.eval(&q)?[0])
    };
    let h = Complex64::new(step, 0.0);
    let ih = Complex64::new(0.0, step);
    let dx = (shifted(h)? - shifted(-h)?) / (2.0 * step);
    let dy = (shifted(ih)? - shifted(-ih)?) / (2.0 * step);
    let i = Complex64::new(0.0, 1.0);
    Ok(if v.barred { 0.5 * (dx + i * dy) } else { 0.5 * (dx - i * dy) })
}

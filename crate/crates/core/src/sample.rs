//! Seeded sample points. Every coordinate is drawn area-uniformly from the
//! annulus `0.3 ≤ |w| ≤ 1.5`, which keeps clear of the origin and of
//! degenerate fibers.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{ComplexExpr, EvalPoint, Var};

pub const INNER_RADIUS: f64 = 0.3;
pub const OUTER_RADIUS: f64 = 1.5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn annulus_value<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let (a, b) = (INNER_RADIUS * INNER_RADIUS, OUTER_RADIUS * OUTER_RADIUS);
    let r = (a + (b - a) * rng.random::<f64>()).sqrt();
    Complex64::from_polar(r, TAU * rng.random::<f64>())
}

pub fn random_point<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> EvalPoint {
    let z = (0..n).map(|_| annulus_value(rng)).collect();
    let u = (0..m).map(|_| annulus_value(rng)).collect();
    EvalPoint::new(z, u)
}

/// `count` points from a generator seeded with `seed`.
pub fn sample_points(n: usize, m: usize, count: usize, seed: u64) -> Vec<EvalPoint> {
    let mut r = rng(seed);
    (0..count).map(|_| random_point(n, m, &mut r)).collect()
}

/// A random complex constant with real and imaginary parts in `[-1, 1]`.
pub fn random_coefficient<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
}

/// Random polynomial in all coordinates and conjugates with `terms`
/// monomials of total degree at most `degree`.
pub fn random_polynomial<R: Rng + ?Sized>(n: usize, m: usize, degree: u32, terms: usize, rng: &mut R) -> ComplexExpr {
    let mut vars = Vec::new();
    for k in 0..n {
        vars.extend([Var::z(k), Var::zbar(k)]);
    }
    for a in 0..m {
        vars.extend([Var::u(a), Var::ubar(a)]);
    }
    let mut acc = ComplexExpr::zero();
    for _ in 0..terms {
        let mut mono = ComplexExpr::constant(random_coefficient(rng));
        let d = rng.random_range(0..=degree);
        for _ in 0..d {
            mono = mono * ComplexExpr::var(vars[rng.random_range(0..vars.len())]);
        }
        acc = acc + mono;
    }
    acc
}

/// Random expression tree of depth at most `depth` over every coordinate
/// and conjugate. Divisions and logarithms are guarded so the result is
/// finite and smooth on the sampling annulus.
pub fn random_expr<R: Rng + ?Sized>(n: usize, m: usize, depth: u32, rng: &mut R) -> ComplexExpr {
    let leaf = |rng: &mut R| -> ComplexExpr {
        let k = rng.random_range(0..2 * (n + m) + 1);
        if k == 2 * (n + m) {
            return ComplexExpr::constant(random_coefficient(rng));
        }
        let (coord, barred) = (k / 2, k % 2 == 1);
        let v = if coord < n { Var::z(coord) } else { Var::u(coord - n) };
        ComplexExpr::var(if barred { v.conj() } else { v })
    };
    if depth == 0 || rng.random_range(0..4) == 0 {
        return leaf(rng);
    }
    let a = random_expr(n, m, depth - 1, rng);
    match rng.random_range(0..9) {
        0 => a + random_expr(n, m, depth - 1, rng),
        1 => a - random_expr(n, m, depth - 1, rng),
        2 | 3 => a * random_expr(n, m, depth - 1, rng),
        // |b|² + 1 is bounded away from zero
        4 => {
            let b = random_expr(n, m, depth - 1, rng);
            a / (&b * b.conj() + ComplexExpr::one())
        }
        5 => (ComplexExpr::real(0.3) * a).exp(),
        6 => (&a * a.conj() + ComplexExpr::real(2.0)).ln(),
        7 => a.conj(),
        _ => -a.powi(rng.random_range(2..=3)),
    }
}

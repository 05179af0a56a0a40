//! A holomorphic Lie algebroid in one fixed local frame: anchor
//! coefficients `ρ^k_α(z)` and structure functions `𝒞^γ_{αβ}(z)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{sum, wirtinger_deriv, ComplexExpr, Coord, DiffCache, EvalPoint, Tape, Var};
use crate::report::{eval_at_points, nan_max, CheckResult, ValidationReport};
use crate::sample::sample_points;

/// Anchor `ρ[α][k]` and structure functions stored for `α < β` only.
/// `𝒞^γ_{βα}` reads as `−𝒞^γ_{αβ}` and `𝒞^γ_{αα}` as zero.
///
/// Also owns the derivative cache shared by everything built on top of it.
#[derive(Clone, Debug)]
pub struct AlgebroidSpec {
    n: usize,
    m: usize,
    anchor: Vec<Vec<ComplexExpr>>,
    structure: BTreeMap<(usize, usize, usize), ComplexExpr>,
    cache: Arc<DiffCache>,
}

fn check_vars(e: &ComplexExpr, n: usize, m: usize, what: &str) -> Result<()> {
    for v in e.variables() {
        let ok = match v.coord {
            Coord::Base(k) => k < n,
            Coord::Fiber(a) => a < m,
        };
        if !ok {
            return Err(Error::Dimension(format!("{what} uses a coordinate outside n={n}, m={m}")));
        }
    }
    Ok(())
}

impl AlgebroidSpec {
    /// `anchor` is `m` rows of `n` entries; structure keys are `(γ, α, β)`
    /// with `α < β`, all 0-based.
    pub fn new(
        n: usize,
        m: usize,
        anchor: Vec<Vec<ComplexExpr>>,
        structure: impl IntoIterator<Item = ((usize, usize, usize), ComplexExpr)>,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Dimension("n and m must be positive".into()));
        }
        if anchor.len() != m || anchor.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("anchor must be {m}×{n}")));
        }
        for row in &anchor {
            for e in row {
                check_vars(e, n, m, "anchor entry")?;
            }
        }
        let mut map = BTreeMap::new();
        for ((g, a, b), e) in structure {
            if g >= m || a >= m || b >= m {
                return Err(Error::Dimension(format!(
                    "structure index ({}, {}, {}) outside 1..={m}",
                    g + 1,
                    a + 1,
                    b + 1
                )));
            }
            if a >= b {
                return Err(Error::Invalid(format!(
                    "structure entry ({}, {}, {}) needs alpha < beta",
                    g + 1,
                    a + 1,
                    b + 1
                )));
            }
            check_vars(&e, n, m, "structure function")?;
            if map.insert((g, a, b), e).is_some() {
                return Err(Error::Invalid(format!("duplicate structure entry ({}, {}, {})", g + 1, a + 1, b + 1)));
            }
        }
        Ok(AlgebroidSpec { n, m, anchor, structure: map, cache: Arc::new(DiffCache::new()) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn anchor(&self, alpha: usize, k: usize) -> &ComplexExpr {
        &self.anchor[alpha][k]
    }

    /// `𝒞^γ_{αβ}` with antisymmetric completion.
    pub fn structure(&self, gamma: usize, alpha: usize, beta: usize) -> ComplexExpr {
        use std::cmp::Ordering::*;
        match alpha.cmp(&beta) {
            Equal => ComplexExpr::zero(),
            Less => self.structure.get(&(gamma, alpha, beta)).cloned().unwrap_or_else(ComplexExpr::zero),
            Greater => -self.structure.get(&(gamma, beta, alpha)).cloned().unwrap_or_else(ComplexExpr::zero),
        }
    }

    /// Stored entries `((γ, α, β), 𝒞^γ_{αβ})` with `α < β`.
    pub fn structure_entries(&self) -> impl Iterator<Item = (&(usize, usize, usize), &ComplexExpr)> {
        self.structure.iter()
    }

    /// `𝒞_α = 𝒞^β_{αβ}`.
    pub fn structure_trace(&self, alpha: usize) -> ComplexExpr {
        sum((0..self.m).map(|b| self.structure(b, alpha, b)))
    }

    pub fn cache(&self) -> &Arc<DiffCache> {
        &self.cache
    }

    /// Wirtinger derivative through the shared cache.
    pub fn deriv(&self, e: &ComplexExpr, v: Var) -> ComplexExpr {
        wirtinger_deriv(e, v, &self.cache)
    }

    /// Fiber derivative `∂̇_α e`, or `∂̇_ᾱ e` when `barred`.
    pub fn vdot(&self, e: &ComplexExpr, alpha: usize, barred: bool) -> ComplexExpr {
        self.deriv(e, Var::new(Coord::Fiber(alpha), barred))
    }
}

/// `∂_α e = ρ^k_α ∂e/∂z^k`, or `conj(ρ^k_α) ∂e/∂z̄^k` when `barred`.
pub fn anchor_derivative(spec: &AlgebroidSpec, e: &ComplexExpr, alpha: usize, barred: bool) -> ComplexExpr {
    sum((0..spec.n).map(|k| {
        let d = spec.deriv(e, Var::new(Coord::Base(k), barred));
        if d.is_zero() {
            return d;
        }
        let rho = spec.anchor(alpha, k);
        if barred {
            rho.conj() * d
        } else {
            rho * d
        }
    }))
}

/// Residual expressions `ρ^j_α ∂_j ρ^k_β − ρ^j_β ∂_j ρ^k_α − 𝒞^γ_{αβ} ρ^k_γ`
/// for all `α < β` and `k`.
pub fn compatibility_residuals(spec: &AlgebroidSpec) -> Vec<ComplexExpr> {
    let mut out = Vec::new();
    for a in 0..spec.m {
        for b in a + 1..spec.m {
            for k in 0..spec.n {
                let lhs = anchor_derivative(spec, spec.anchor(b, k), a, false)
                    - anchor_derivative(spec, spec.anchor(a, k), b, false);
                let rhs = sum((0..spec.m).map(|g| spec.structure(g, a, b) * spec.anchor(g, k)));
                out.push(lhs - rhs);
            }
        }
    }
    out
}

/// Residual expressions of the cyclic Jacobi sum
/// `Σ_cyc [ρ^k_α ∂_k 𝒞^τ_{βγ} + 𝒞^ε_{βγ} 𝒞^τ_{αε}]` for `α < β < γ` and all `τ`.
pub fn jacobi_residuals(spec: &AlgebroidSpec) -> Vec<ComplexExpr> {
    let m = spec.m;
    let term = |a: usize, b: usize, g: usize, t: usize| {
        anchor_derivative(spec, &spec.structure(t, b, g), a, false)
            + sum((0..m).map(|e| spec.structure(e, b, g) * spec.structure(t, a, e)))
    };
    let mut out = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            for g in b + 1..m {
                for t in 0..m {
                    out.push(term(a, b, g, t) + term(b, g, a, t) + term(g, a, b, t));
                }
            }
        }
    }
    out
}

fn max_abs(exprs: &[ComplexExpr], points: &[EvalPoint]) -> Result<f64> {
    if exprs.is_empty() {
        return Ok(0.0);
    }
    let values = eval_at_points(exprs, points)?;
    Ok(values.iter().flatten().fold(0.0, |acc, v| nan_max(acc, v.norm())))
}

/// Largest anchor-compatibility residual at the base point `z`.
pub fn compatibility_residual_at(spec: &AlgebroidSpec, z: &[Complex64]) -> Result<f64> {
    if z.len() != spec.n {
        return Err(Error::Dimension(format!("point has {} base coordinates, expected {}", z.len(), spec.n)));
    }
    let p = EvalPoint::new(z.to_vec(), vec![Complex64::new(1.0, 0.0); spec.m]);
    let res = compatibility_residuals(spec);
    if res.is_empty() {
        return Ok(0.0);
    }
    let values = Tape::compile(&res).eval(&p)?;
    Ok(values.iter().fold(0.0, |acc, v| nan_max(acc, v.norm())))
}

/// Holomorphy (symbolic), anchor compatibility and Jacobi at `samples`
/// seeded base points. Residuals are absolute.
pub fn validate_algebroid(spec: &AlgebroidSpec, samples: usize, seed: u64, tol: f64) -> Result<ValidationReport> {
    if samples == 0 {
        return Err(Error::Invalid("samples must be at least 1".into()));
    }
    let entries: Vec<&ComplexExpr> = spec.anchor.iter().flatten().chain(spec.structure.values()).collect();
    let offending = entries.iter().filter(|e| !e.is_holomorphic() || e.depends_on_fiber()).count();
    let mut report = ValidationReport::new();
    report.push(CheckResult::measured("holomorphy", offending as f64, entries.len(), 0.0));

    let points = sample_points(spec.n, spec.m, samples, seed);
    let compat = max_abs(&compatibility_residuals(spec), &points)?;
    report.push(CheckResult::measured("anchor compatibility", compat, samples, tol));
    let jacobi = max_abs(&jacobi_residuals(spec), &points)?;
    report.push(CheckResult::measured("jacobi", jacobi, samples, tol));
    Ok(report)
}

/// `[∂_α, ∂_β] f = 𝒞^γ_{αβ} ∂_γ f` on each test function, all `α < β`.
pub fn verify_anchor_brackets(
    spec: &AlgebroidSpec,
    testfns: &[ComplexExpr],
    points: &[EvalPoint],
    tol: f64,
) -> Result<CheckResult> {
    let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
    for f in testfns {
        for a in 0..spec.m {
            for b in a + 1..spec.m {
                let da = anchor_derivative(spec, f, a, false);
                let db = anchor_derivative(spec, f, b, false);
                lhs.push(anchor_derivative(spec, &db, a, false) - anchor_derivative(spec, &da, b, false));
                rhs.push(sum((0..spec.m).map(|g| spec.structure(g, a, b) * anchor_derivative(spec, f, g, false))));
            }
        }
    }
    crate::report::compare("anchor operator brackets", &lhs, &rhs, points, tol)
}

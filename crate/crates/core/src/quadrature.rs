//! Midpoint-rule integration over a box in the real coordinates of `(z, u)`
//! and the integral vanishing identities for horizontal sections.
//!
//! Accumulation is deterministic: points are cut into fixed-size chunks in
//! lexicographic order, each chunk and then the chunk totals are summed
//! pairwise, so results do not depend on the thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::calculus::{horizontal_cov_divergence, l_contraction, volume_density, SectionField};
use crate::connection::{kahler_residual, ConnectionData};
use crate::error::{Error, Result};
use crate::expr::{ComplexExpr, EvalPoint, Tape};
use crate::report::{nan_max, CheckResult, ValidationReport};
use crate::sample::sample_points;

pub const DEFAULT_BUDGET: u128 = 1 << 24;
pub const MIN_GRID: usize = 8;
const CHUNK: usize = 4096;

/// Axes are ordered `re z¹..re zⁿ, im z¹..im zⁿ, re u¹..re uᵐ, im u¹..im uᵐ`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationDomain {
    pub n: usize,
    pub m: usize,
    pub bounds: Vec<(f64, f64)>,
    pub grid: usize,
    pub budget: u128,
}

impl IntegrationDomain {
    pub fn new(n: usize, m: usize, bounds: Vec<(f64, f64)>, grid: usize) -> Result<Self> {
        if bounds.len() != 2 * (n + m) {
            return Err(Error::Dimension(format!("expected {} axis bounds, got {}", 2 * (n + m), bounds.len())));
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::Domain(format!("invalid axis bounds [{lo}, {hi}]")));
        }
        if grid < MIN_GRID {
            return Err(Error::Domain(format!("grid must have at least {MIN_GRID} points per axis, got {grid}")));
        }
        Ok(IntegrationDomain { n, m, bounds, grid, budget: DEFAULT_BUDGET })
    }

    /// Same interval on every axis.
    pub fn cube(n: usize, m: usize, lo: f64, hi: f64, grid: usize) -> Result<Self> {
        Self::new(n, m, vec![(lo, hi); 2 * (n + m)], grid)
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_grid(&self, grid: usize) -> Result<Self> {
        Ok(Self::new(self.n, self.m, self.bounds.clone(), grid)?.with_budget(self.budget))
    }

    pub fn axes(&self) -> usize {
        self.bounds.len()
    }

    pub fn total_points(&self) -> u128 {
        (self.grid as u128).saturating_pow(self.axes() as u32)
    }

    pub fn step(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / self.grid as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.axes()).map(|a| self.step(a)).product()
    }

    fn check_budget(&self) -> Result<usize> {
        let points = self.total_points();
        if points > self.budget {
            return Err(Error::BudgetExceeded { points, budget: self.budget });
        }
        usize::try_from(points).map_err(|_| Error::BudgetExceeded { points, budget: self.budget })
    }

    fn midpoint(&self, axis: usize, i: usize) -> f64 {
        self.bounds[axis].0 + (i as f64 + 0.5) * self.step(axis)
    }

    /// Fills the coordinate columns for points `start..start + width`.
    fn fill_columns(&self, start: usize, width: usize, z: &mut [Vec<Complex64>], u: &mut [Vec<Complex64>]) {
        let (n, m, g) = (self.n, self.m, self.grid);
        for col in z.iter_mut().chain(u.iter_mut()) {
            col.clear();
        }
        let mut digits = vec![0usize; self.axes()];
        for j in 0..width {
            let mut flat = start + j;
            for d in digits.iter_mut().rev() {
                *d = flat % g;
                flat /= g;
            }
            let x = |axis: usize| self.midpoint(axis, digits[axis]);
            for k in 0..n {
                z[k].push(Complex64::new(x(k), x(n + k)));
            }
            for a in 0..m {
                u[a].push(Complex64::new(x(2 * n + a), x(2 * n + m + a)));
            }
        }
    }
}

/// Pairwise summation; error grows like `log(len)` instead of `len`.
pub fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Integrals of every expression over `dom`, sharing one grid pass.
pub fn integrate_many(exprs: &[ComplexExpr], dom: &IntegrationDomain) -> Result<Vec<Complex64>> {
    let total = dom.check_budget()?;
    let tape = Tape::compile(exprs);
    let k = exprs.len();
    let chunks = total.div_ceil(CHUNK);
    let partial: Vec<Vec<Complex64>> = (0..chunks)
        .into_par_iter()
        .map_init(
            || {
                let z = vec![Vec::with_capacity(CHUNK); dom.n];
                let u = vec![Vec::with_capacity(CHUNK); dom.m];
                (z, u, Vec::new(), vec![Vec::new(); k])
            },
            |(z, u, scratch, out), c| {
                let start = c * CHUNK;
                let width = CHUNK.min(total - start);
                dom.fill_columns(start, width, z, u);
                for o in out.iter_mut() {
                    o.clear();
                    o.resize(width, Complex64::new(0.0, 0.0));
                }
                tape.eval_batch(z, u, scratch, out)?;
                Ok(out.iter().map(|o| pairwise_sum(o)).collect())
            },
        )
        .collect::<Result<_>>()?;
    let vol = dom.cell_volume();
    Ok((0..k)
        .map(|i| {
            let col: Vec<Complex64> = partial.iter().map(|p| p[i]).collect();
            pairwise_sum(&col) * vol
        })
        .collect())
}

/// `∫ f·weight` over `dom`.
pub fn integrate(f: &ComplexExpr, weight: &ComplexExpr, dom: &IntegrationDomain) -> Result<Complex64> {
    Ok(integrate_many(&[f * weight], dom)?[0])
}

/// Integrands of the vanishing identities for a horizontal section,
/// each multiplied by `det_h²`.
pub struct IdentityIntegrands {
    /// `(∇_{𝒳_α}Z^α − Z^αL_α)det_h²`.
    pub int1: ComplexExpr,
    /// Its conjugate counterpart.
    pub int1_conj: ComplexExpr,
    /// `∇_{𝒳_α}Z^α det_h²`.
    pub int2: ComplexExpr,
}

pub fn identity_integrands(z: &SectionField, cd: &ConnectionData) -> Result<IdentityIntegrands> {
    if !z.is_horizontal() {
        return Err(Error::WrongBlock("integral identities expect a purely horizontal section"));
    }
    let w = volume_density(&cd.fd).density;
    let nabla = horizontal_cov_divergence(&z.zh, cd);
    let int1 = (&nabla - l_contraction(&z.zh, cd)) * &w;
    Ok(IdentityIntegrands { int1_conj: int1.conj(), int2: nabla * &w, int1 })
}

/// Largest `|Z^α|·det_h²` on a coarse grid over the faces of the box. A
/// large value means the section is not effectively supported inside it.
pub fn boundary_magnitude(z: &SectionField, cd: &ConnectionData, dom: &IntegrationDomain) -> Result<f64> {
    let w = volume_density(&cd.fd).density;
    let exprs: Vec<ComplexExpr> = z.zh.iter().map(|c| c * &w).collect();
    let tape = Tape::compile(&exprs);
    const FACE_GRID: usize = 9;
    let axes = dom.axes();
    let mut worst: f64 = 0.0;
    for fixed in 0..axes {
        for side in [dom.bounds[fixed].0, dom.bounds[fixed].1] {
            let count = FACE_GRID.pow(axes as u32 - 1);
            for mut flat in 0..count {
                let mut x = vec![0.0; axes];
                for (axis, xv) in x.iter_mut().enumerate() {
                    if axis == fixed {
                        *xv = side;
                        continue;
                    }
                    let (lo, hi) = dom.bounds[axis];
                    *xv = lo + (hi - lo) * (flat % FACE_GRID) as f64 / (FACE_GRID - 1) as f64;
                    flat /= FACE_GRID;
                }
                let (n, m) = (dom.n, dom.m);
                let p = EvalPoint::new(
                    (0..n).map(|k| Complex64::new(x[k], x[n + k])).collect(),
                    (0..m).map(|a| Complex64::new(x[2 * n + a], x[2 * n + m + a])).collect(),
                );
                worst = tape.eval(&p)?.iter().fold(worst, |acc, v| nan_max(acc, v.norm()));
            }
        }
    }
    Ok(worst)
}

/// Halving the step shrinks `|I|` at least twofold, unless `|I|` is already
/// at or below `floor`. Returns `(|I| coarse, |I| fine)` in the check.
pub fn refinement_check(
    name: &str,
    integrand: &ComplexExpr,
    dom: &IntegrationDomain,
    floor: f64,
) -> Result<CheckResult> {
    let coarse = dom.with_grid((dom.grid / 2).max(MIN_GRID))?;
    let ic = integrate_many(std::slice::from_ref(integrand), &coarse)?[0].norm();
    let ifine = integrate_many(std::slice::from_ref(integrand), dom)?[0].norm();
    Ok(CheckResult::measured(name, ifine, dom.grid, floor.max(ic / 2.0)))
}

/// Vanishing of the identity integrals over `dom` within `tol`, the
/// Kähler variant when it applies, the boundary-support heuristic and grid
/// refinement.
pub fn check_integral_identity(
    z: &SectionField,
    cd: &ConnectionData,
    dom: &IntegrationDomain,
    tol: f64,
) -> Result<ValidationReport> {
    let ints = identity_integrands(z, cd)?;
    let values = integrate_many(&[ints.int1.clone(), ints.int1_conj.clone(), ints.int2.clone()], dom)?;
    let samples = usize::try_from(dom.total_points()).unwrap_or(usize::MAX);
    let mut rep = ValidationReport::new();
    rep.push(CheckResult::measured("support", boundary_magnitude(z, cd, dom)?, samples, tol));
    rep.push(CheckResult::measured("int1", values[0].norm(), samples, tol));
    rep.push(CheckResult::measured("int1 conjugate", values[1].norm(), samples, tol));
    let points = sample_points(cd.n_dim(), cd.m(), 20, 42);
    if kahler_residual(cd, &points)? <= 1e-9 {
        rep.push(CheckResult::measured("int2", values[2].norm(), samples, tol));
    } else {
        rep.push(CheckResult::skipped("int2", "not kahler"));
    }
    rep.push(refinement_check("int1 refinement", &ints.int1, dom, tol)?);
    Ok(rep)
}

/// Raw integral values, for reporting.
pub fn identity_values(
    z: &SectionField,
    cd: &ConnectionData,
    dom: &IntegrationDomain,
) -> Result<(Complex64, Complex64, Complex64)> {
    let ints = identity_integrands(z, cd)?;
    let v = integrate_many(&[ints.int1, ints.int1_conj, ints.int2], dom)?;
    Ok((v[0], v[1], v[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::tests::fixture;
    use crate::expr::parse_expr;
    use std::f64::consts::PI;

    fn ex(t: &str) -> ComplexExpr {
        parse_expr(t, 1, 1).unwrap()
    }

    #[test]
    fn gaussian_and_symmetry_examples() {
        let dom = IntegrationDomain::cube(1, 1, -4.0, 4.0, 32).unwrap();
        let g = integrate(&ex("exp(-z1*conj(z1)-u1*conj(u1))"), &ComplexExpr::one(), &dom).unwrap();
        assert!((g - PI * PI).norm() / (PI * PI) < 1e-3, "{g}");
        let odd = integrate(&ex("z1*exp(-z1*conj(z1)-u1*conj(u1))"), &ComplexExpr::one(), &dom).unwrap();
        assert!(odd.norm() < 1e-6);
        let unit = IntegrationDomain::cube(1, 1, 0.0, 1.0, 8).unwrap();
        assert!((integrate(&ComplexExpr::one(), &ComplexExpr::one(), &unit).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn gaussian_at_default_grid() {
        let dom = IntegrationDomain::cube(1, 1, -4.0, 4.0, 64).unwrap();
        let g = integrate(&ex("exp(-z1*conj(z1)-u1*conj(u1))"), &ComplexExpr::one(), &dom).unwrap();
        assert!((g - PI * PI).norm() / (PI * PI) < 1e-3);
    }

    #[test]
    fn polynomial_moment_matches_closed_form() {
        // ∫_{[0,1]^4} x0^2 x3 = 1/6; midpoint error on x^2 is h^2/12 per axis
        let dom = IntegrationDomain::cube(1, 1, 0.0, 1.0, 16).unwrap();
        let f = ex("((z1 + conj(z1))/2)^2 * (u1 - conj(u1))/(2*i)");
        let got = integrate(&f, &ComplexExpr::one(), &dom).unwrap();
        let h = 1.0 / 16.0;
        let want = (1.0 / 3.0 - h * h / 12.0) * 0.5;
        assert!((got - want).norm() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn linear_in_integrand() {
        let dom = IntegrationDomain::cube(1, 1, -2.0, 2.0, 12).unwrap();
        let (f, g) = (ex("exp(-z1*conj(z1))*u1"), ex("conj(z1)^2*exp(-u1*conj(u1))"));
        let a = Complex64::new(1.5, -0.5);
        let lhs = integrate(&(ComplexExpr::constant(a) * &f + &g), &ComplexExpr::one(), &dom).unwrap();
        let rhs =
            a * integrate(&f, &ComplexExpr::one(), &dom).unwrap() + integrate(&g, &ComplexExpr::one(), &dom).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn deterministic_chunking() {
        let dom = IntegrationDomain::cube(1, 1, -3.0, 3.0, 20).unwrap();
        let f = ex("exp(-z1*conj(z1)-u1*conj(u1))*(z1+u1^2)");
        let a = integrate(&f, &ComplexExpr::one(), &dom).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| integrate(&f, &ComplexExpr::one(), &dom).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn domain_validation() {
        assert!(matches!(IntegrationDomain::cube(1, 1, 1.0, -1.0, 16), Err(Error::Domain(_))));
        assert!(matches!(IntegrationDomain::cube(1, 1, -1.0, 1.0, 4), Err(Error::Domain(_))));
        assert!(matches!(IntegrationDomain::new(1, 1, vec![(0.0, 1.0)], 16), Err(Error::Dimension(_))));
        let dom = IntegrationDomain::cube(1, 1, -1.0, 1.0, 128).unwrap();
        assert!(matches!(integrate(&ComplexExpr::one(), &ComplexExpr::one(), &dom), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn fixture_a_identity() {
        let cd = fixture('A');
        let dom = IntegrationDomain::cube(1, 1, -4.0, 4.0, 32).unwrap();
        let z = SectionField::horizontal(vec![ex("exp(-z1*conj(z1)-u1*conj(u1))")]);
        let rep = check_integral_identity(&z, &cd, &dom, 1e-3).unwrap();
        assert!(rep.pass(), "{rep:?}");
        // non-decaying section: the support heuristic fires
        let z = SectionField::horizontal(vec![ComplexExpr::one()]);
        let rep = check_integral_identity(&z, &cd, &dom, 1e-3).unwrap();
        assert!(rep.get("support").unwrap().failed());
    }
}

//! Chern–Finsler nonlinear connection, the adapted-frame operators `δ_α`,
//! the linear connection `(L, C)`, the curvature `R` of the horizontal
//! distribution, and the identities relating them.

use crate::algebroid::{anchor_derivative, AlgebroidSpec};
use crate::error::Result;
use crate::expr::{sum, ComplexExpr, EvalPoint};
use crate::finsler::FinslerData;
use crate::report::{compare, max_scaled_residual, CheckResult};

/// Three-index arrays are stored `[γ][α][β]` for `X^γ_{αβ}`.
pub type Array3 = Vec<Vec<Vec<ComplexExpr>>>;

#[derive(Clone, Debug)]
pub struct ConnectionData {
    pub spec: AlgebroidSpec,
    pub fd: FinslerData,
    /// `n[α][β] = N^β_α`.
    pub n: Vec<Vec<ComplexExpr>>,
    /// `n_bar[α][β] = conj(N^β_α)`.
    pub n_bar: Vec<Vec<ComplexExpr>>,
    pub l: Array3,
    pub c: Array3,
    pub r: Array3,
    /// `L_α = L^β_{αβ} − L^β_{βα}`.
    pub l_trace: Vec<ComplexExpr>,
    /// `C_α = C^β_{αβ}`.
    pub c_trace: Vec<ComplexExpr>,
    /// `𝒞_α = 𝒞^β_{αβ}`.
    pub s_trace: Vec<ComplexExpr>,
}

fn array3(m: usize, f: impl Fn(usize, usize, usize) -> ComplexExpr) -> Array3 {
    (0..m).map(|g| (0..m).map(|a| (0..m).map(|b| f(g, a, b)).collect()).collect()).collect()
}

pub fn build_connection(spec: &AlgebroidSpec, fd: &FinslerData) -> Result<ConnectionData> {
    let m = spec.m();
    let k = &fd.h_inv;
    let fbar: Vec<ComplexExpr> = (0..m).map(|s| spec.vdot(&fd.f, s, true)).collect();
    let n: Vec<Vec<ComplexExpr>> = (0..m)
        .map(|a| {
            let d: Vec<ComplexExpr> = fbar.iter().map(|e| anchor_derivative(spec, e, a, false)).collect();
            (0..m).map(|b| sum((0..m).map(|s| &k[s][b] * &d[s]))).collect()
        })
        .collect();
    let n_bar = n.iter().map(|row| row.iter().map(ComplexExpr::conj).collect()).collect();
    let mut cd = ConnectionData {
        spec: spec.clone(),
        fd: fd.clone(),
        n,
        n_bar,
        l: Vec::new(),
        c: Vec::new(),
        r: Vec::new(),
        l_trace: Vec::new(),
        c_trace: Vec::new(),
        s_trace: (0..m).map(|a| spec.structure_trace(a)).collect(),
    };
    // δ_β h_{ασ̄} and ∂̇_β h_{ασ̄}, indexed [α][σ][β]
    let dh: Array3 = array3(m, |a, s, b| cd.delta(&fd.h[a][s], b, false));
    let vh: Array3 = array3(m, |a, s, b| spec.vdot(&fd.h[a][s], b, false));
    cd.l = array3(m, |g, a, b| sum((0..m).map(|s| &k[s][g] * &dh[a][s][b])));
    cd.c = array3(m, |g, a, b| sum((0..m).map(|s| &k[s][g] * &vh[a][s][b])));
    cd.r = array3(m, |g, a, b| {
        sum((0..m).map(|e| spec.structure(e, a, b) * &cd.n[e][g])) - cd.delta(&cd.n[b][g], a, false)
            + cd.delta(&cd.n[a][g], b, false)
    });
    cd.l_trace = (0..m).map(|a| sum((0..m).map(|b| &cd.l[b][a][b] - &cd.l[b][b][a]))).collect();
    cd.c_trace = (0..m).map(|a| sum((0..m).map(|b| cd.c[b][a][b].clone()))).collect();
    Ok(cd)
}

impl ConnectionData {
    pub fn m(&self) -> usize {
        self.spec.m()
    }

    pub fn n_dim(&self) -> usize {
        self.spec.n()
    }

    /// `δ_α e = ∂_α e − N^β_α ∂̇_β e`; the barred version conjugates the
    /// coefficients and differentiates in the barred variables.
    pub fn delta(&self, e: &ComplexExpr, alpha: usize, barred: bool) -> ComplexExpr {
        let coef = if barred { &self.n_bar } else { &self.n };
        anchor_derivative(&self.spec, e, alpha, barred)
            - sum((0..self.m()).map(|b| {
                let d = self.spec.vdot(e, b, barred);
                if d.is_zero() {
                    d
                } else {
                    &coef[alpha][b] * d
                }
            }))
    }

    /// `∂̇_α e` or `∂̇_ᾱ e`.
    pub fn vdot(&self, e: &ComplexExpr, alpha: usize, barred: bool) -> ComplexExpr {
        self.spec.vdot(e, alpha, barred)
    }

    /// `N^β_α`.
    pub fn n_coef(&self, alpha: usize, beta: usize) -> &ComplexExpr {
        &self.n[alpha][beta]
    }

    /// `h^{σ̄β}`.
    pub fn k(&self, sigma: usize, beta: usize) -> &ComplexExpr {
        &self.fd.h_inv[sigma][beta]
    }

    pub fn ln_det(&self) -> ComplexExpr {
        self.fd.det_h.ln()
    }
}

/// Free-function form of [`ConnectionData::delta`].
pub fn delta_deriv(e: &ComplexExpr, alpha: usize, barred: bool, cd: &ConnectionData) -> ComplexExpr {
    cd.delta(e, alpha, barred)
}

/// One row of the adapted-frame bracket table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BracketRow {
    XX,
    XXbar,
    XV,
    XVbar,
    VV,
    VVbar,
}

impl BracketRow {
    pub const ALL: [BracketRow; 6] =
        [BracketRow::XX, BracketRow::XXbar, BracketRow::XV, BracketRow::XVbar, BracketRow::VV, BracketRow::VVbar];

    pub fn name(self) -> &'static str {
        match self {
            BracketRow::XX => "bracket [X_a, X_b]",
            BracketRow::XXbar => "bracket [X_a, X_bbar]",
            BracketRow::XV => "bracket [X_a, V_b]",
            BracketRow::XVbar => "bracket [X_a, V_bbar]",
            BracketRow::VV => "bracket [V_a, V_b]",
            BracketRow::VVbar => "bracket [V_a, V_bbar]",
        }
    }
}

/// Applies the frame field named by `(horizontal, barred)` to `e`.
fn frame(cd: &ConnectionData, e: &ComplexExpr, idx: usize, horizontal: bool, barred: bool) -> ComplexExpr {
    if horizontal {
        cd.delta(e, idx, barred)
    } else {
        cd.vdot(e, idx, barred)
    }
}

/// Commutator of two frame fields applied to `f`, and the right-hand side
/// of the bracket table for the same pair, for every `(α, β)`.
pub fn bracket_sides(cd: &ConnectionData, row: BracketRow, f: &ComplexExpr) -> (Vec<ComplexExpr>, Vec<ComplexExpr>) {
    let m = cd.m();
    let (h1, h2, b2) = match row {
        BracketRow::XX => (true, true, false),
        BracketRow::XXbar => (true, true, true),
        BracketRow::XV => (true, false, false),
        BracketRow::XVbar => (true, false, true),
        BracketRow::VV => (false, false, false),
        BracketRow::VVbar => (false, false, true),
    };
    let vf: Vec<ComplexExpr> = (0..m).map(|g| cd.vdot(f, g, false)).collect();
    let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
    for a in 0..m {
        let fa = frame(cd, f, a, h1, false);
        for b in 0..m {
            let fb = frame(cd, f, b, h2, b2);
            lhs.push(frame(cd, &fb, a, h1, false) - frame(cd, &fa, b, h2, b2));
            rhs.push(match row {
                BracketRow::XX => {
                    sum((0..m).map(|g| cd.spec.structure(g, a, b) * cd.delta(f, g, false) + &cd.r[g][a][b] * &vf[g]))
                }
                BracketRow::XXbar => sum((0..m).map(|g| {
                    cd.delta(&cd.n[a][g], b, true) * &vf[g] - cd.delta(&cd.n_bar[b][g], a, false) * cd.vdot(f, g, true)
                })),
                BracketRow::XV => sum((0..m).map(|g| cd.vdot(&cd.n[a][g], b, false) * &vf[g])),
                BracketRow::XVbar => sum((0..m).map(|g| cd.vdot(&cd.n[a][g], b, true) * &vf[g])),
                BracketRow::VV | BracketRow::VVbar => ComplexExpr::zero(),
            });
        }
    }
    (lhs, rhs)
}

/// Every bracket row on every test function.
pub fn verify_brackets(
    cd: &ConnectionData,
    testfns: &[ComplexExpr],
    points: &[EvalPoint],
    tol: f64,
) -> Result<Vec<CheckResult>> {
    BracketRow::ALL
        .iter()
        .map(|&row| {
            let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
            for f in testfns {
                let (l, r) = bracket_sides(cd, row, f);
                lhs.extend(l);
                rhs.extend(r);
            }
            compare(row.name(), &lhs, &rhs, points, tol)
        })
        .collect()
}

/// `C^γ_{αβ} = C^γ_{βα}`.
pub fn check_c_symmetry(cd: &ConnectionData, points: &[EvalPoint], tol: f64) -> Result<CheckResult> {
    let (l, r) = pairs(cd.m(), |g, a, b| (cd.c[g][a][b].clone(), cd.c[g][b][a].clone()));
    compare("C symmetry", &l, &r, points, tol)
}

/// `L^γ_{αβ} = ∂̇_α N^γ_β` as printed, plus the transposed reading
/// `L^γ_{αβ} = ∂̇_β N^γ_α` returned separately as a diagnostic.
pub fn check_l_n(cd: &ConnectionData, points: &[EvalPoint], tol: f64) -> Result<(CheckResult, CheckResult)> {
    let (l, r) = pairs(cd.m(), |g, a, b| (cd.l[g][a][b].clone(), cd.vdot(&cd.n[b][g], a, false)));
    let (lt, rt) = pairs(cd.m(), |g, a, b| (cd.l[g][a][b].clone(), cd.vdot(&cd.n[a][g], b, false)));
    Ok((compare("L = vdot N", &l, &r, points, tol)?, compare("L = vdot N (transposed)", &lt, &rt, points, tol)?))
}

/// `R^γ_{αβ} = −R^γ_{βα}`.
pub fn check_r_antisymmetry(cd: &ConnectionData, points: &[EvalPoint], tol: f64) -> Result<CheckResult> {
    let (l, r) = pairs(cd.m(), |g, a, b| (cd.r[g][a][b].clone(), -&cd.r[g][b][a]));
    compare("R antisymmetry", &l, &r, points, tol)
}

/// `L^β_{βα} = δ_α(ln h)` and `C^β_{βα} = ∂̇_α(ln h)`.
pub fn check_traces(cd: &ConnectionData, points: &[EvalPoint], tol: f64) -> Result<(CheckResult, CheckResult)> {
    let m = cd.m();
    let ln_h = cd.ln_det();
    let lt: Vec<ComplexExpr> = (0..m).map(|a| sum((0..m).map(|b| cd.l[b][b][a].clone()))).collect();
    let ld: Vec<ComplexExpr> = (0..m).map(|a| cd.delta(&ln_h, a, false)).collect();
    let ct: Vec<ComplexExpr> = (0..m).map(|a| sum((0..m).map(|b| cd.c[b][b][a].clone()))).collect();
    let cv: Vec<ComplexExpr> = (0..m).map(|a| cd.vdot(&ln_h, a, false)).collect();
    Ok((
        compare("trace L = delta ln h", &lt, &ld, points, tol)?,
        compare("trace C = vdot ln h", &ct, &cv, points, tol)?,
    ))
}

/// Largest scaled `|L^σ_{αγ} − L^σ_{γα}|` over the points.
pub fn kahler_residual(cd: &ConnectionData, points: &[EvalPoint]) -> Result<f64> {
    let (l, r) = pairs(cd.m(), |s, a, g| (cd.l[s][a][g].clone(), cd.l[s][g][a].clone()));
    max_scaled_residual(&l, &r, points)
}

pub fn is_kahler(cd: &ConnectionData, samples: usize, seed: u64, tol: f64) -> Result<bool> {
    let points = crate::sample::sample_points(cd.n_dim(), cd.m(), samples, seed);
    Ok(kahler_residual(cd, &points)? <= tol)
}

fn pairs(
    m: usize,
    f: impl Fn(usize, usize, usize) -> (ComplexExpr, ComplexExpr),
) -> (Vec<ComplexExpr>, Vec<ComplexExpr>) {
    let mut l = Vec::new();
    let mut r = Vec::new();
    for g in 0..m {
        for a in 0..m {
            for b in 0..m {
                let (x, y) = f(g, a, b);
                l.push(x);
                r.push(y);
            }
        }
    }
    (l, r)
}

/// Three scalar test functions exercising every coordinate and conjugate.
pub fn default_test_functions(n: usize, m: usize) -> Vec<ComplexExpr> {
    use crate::expr::Var;
    let z = |k: usize| ComplexExpr::var(Var::z(k));
    let zb = |k: usize| ComplexExpr::var(Var::zbar(k));
    let u = |a: usize| ComplexExpr::var(Var::u(a));
    let ub = |a: usize| ComplexExpr::var(Var::ubar(a));
    let norm_z = sum((0..n).map(|k| z(k) * zb(k)));
    let norm_u = sum((0..m).map(|a| u(a) * ub(a)));
    let f1 = norm_u.clone();
    let f2 = sum((0..m).map(|a| ComplexExpr::real(1.0 + a as f64) * u(a) * zb(a % n)))
        + sum((0..n).map(|k| z(k).powi(2) * ub(k % m)));
    let f3 = (norm_z * ComplexExpr::real(0.5)).exp() * u(0) * ub(m - 1) + (u(m - 1) * ub(0)).powi(2);
    vec![f1, f2, f3]
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::expr::{eval_expr, parse_expr};
    use crate::finsler::build_finsler;
    use crate::sample::sample_points;
    use num_complex::Complex64;

    pub(crate) fn fixture(name: char) -> ConnectionData {
        let (n, m, anchor, structure, f): (usize, usize, Vec<&str>, Vec<((usize, usize, usize), &str)>, &str) =
            match name {
                'A' => (1, 1, vec!["1"], vec![], "u1*conj(u1)"),
                'B' => (1, 1, vec!["z1"], vec![], "exp(z1*conj(z1))*u1*conj(u1)"),
                _ => (1, 2, vec!["1", "z1"], vec![((0, 0, 1), "1")], "exp(z1*conj(z1))*(u1*conj(u1)+u2*conj(u2))"),
            };
        let anchor = anchor.iter().map(|t| vec![parse_expr(t, n, m).unwrap()]).collect();
        let structure = structure.into_iter().map(|(k, t)| (k, parse_expr(t, n, m).unwrap()));
        let spec = AlgebroidSpec::new(n, m, anchor, structure).unwrap();
        let fd = build_finsler(&spec, parse_expr(f, n, m).unwrap()).unwrap();
        build_connection(&spec, &fd).unwrap()
    }

    fn at(cd: &ConnectionData, e: &ComplexExpr, z: Complex64, u: &[Complex64]) -> Complex64 {
        assert_eq!(u.len(), cd.m());
        eval_expr(e, &EvalPoint::new(vec![z], u.to_vec())).unwrap()
    }

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    #[test]
    fn fixture_a_is_flat() {
        let cd = fixture('A');
        assert!(cd.n[0][0].is_zero());
        assert!(cd.l[0][0][0].is_zero() && cd.c[0][0][0].is_zero() && cd.r[0][0][0].is_zero());
    }

    #[test]
    fn fixture_b_values() {
        let cd = fixture('B');
        let p = Complex64::new(0.8, -0.3);
        let u = Complex64::new(1.1, 0.4);
        // N = z z̄ u, L = z z̄
        assert!((at(&cd, &cd.n[0][0], p, &[u]) - p.norm_sqr() * u).norm() < 1e-14);
        assert!((at(&cd, &cd.l[0][0][0], p, &[u]) - p.norm_sqr()).norm() < 1e-14);
        assert!((at(&cd, &cd.n[0][0], ONE, &[ONE]) - ONE).norm() < 1e-14);
    }

    #[test]
    fn fixture_c_nonlinear_connection() {
        let cd = fixture('C');
        let z = Complex64::new(0.6, 0.9);
        let u = [Complex64::new(1.2, -0.2), Complex64::new(-0.4, 0.7)];
        let rho = [ONE, z];
        for a in 0..2 {
            for b in 0..2 {
                let want = rho[a] * z.conj() * u[b];
                assert!((at(&cd, &cd.n[a][b], z, &u) - want).norm() < 1e-13);
                for g in 0..2 {
                    // L^γ_{αβ} = δ^γ_α ρ_β z̄
                    let want = if g == a { rho[b] * z.conj() } else { Complex64::new(0.0, 0.0) };
                    assert!((at(&cd, &cd.l[g][a][b], z, &u) - want).norm() < 1e-13);
                }
            }
        }
        assert!((at(&cd, &cd.s_trace[1], z, &u) + ONE).norm() < 1e-15);
        for a in 0..2 {
            assert!((at(&cd, &cd.l_trace[a], z, &u) + rho[a] * z.conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn fixture_c_curvature_matches_brute_force() {
        // R^γ_{12} = 𝒞^1_{12} N^γ_1 − δ_1 N^γ_2 + δ_2 N^γ_1, each term by finite differences.
        let cd = fixture('C');
        let p = EvalPoint::new(vec![ONE], vec![ONE, ONE]);
        let h = 1e-5;
        for g in 0..2 {
            let fd_delta = |e: &ComplexExpr, a: usize| -> Complex64 {
                let rho = [ONE, p.z[0]];
                let dz = crate::expr::fd_deriv(e, crate::expr::Var::z(0), &p, h).unwrap();
                let mut acc = rho[a] * dz;
                for b in 0..2 {
                    let du = crate::expr::fd_deriv(e, crate::expr::Var::u(b), &p, h).unwrap();
                    acc -= eval_expr(&cd.n[a][b], &p).unwrap() * du;
                }
                acc
            };
            let want = eval_expr(&cd.n[0][g], &p).unwrap() - fd_delta(&cd.n[1][g], 0) + fd_delta(&cd.n[0][g], 1);
            let got = eval_expr(&cd.r[g][0][1], &p).unwrap();
            assert!((got - want).norm() < 1e-7, "γ={g}: {got} vs {want}");
        }
    }

    #[test]
    fn delta_examples() {
        let a = fixture('A');
        let zz = parse_expr("z1*conj(z1)", 1, 1).unwrap();
        let z = Complex64::new(0.3, 0.4);
        assert!((at(&a, &a.delta(&zz, 0, false), z, &[ONE]) - z.conj()).norm() < 1e-15);
        let b = fixture('B');
        let uu = parse_expr("u1*conj(u1)", 1, 1).unwrap();
        assert!((at(&b, &b.delta(&uu, 0, false), ONE, &[ONE]) + ONE).norm() < 1e-14);
        assert!((at(&b, &b.delta(&zz, 0, true), ONE, &[ONE]) - ONE).norm() < 1e-14);
    }

    #[test]
    fn identities_hold_on_all_fixtures() {
        for name in ['A', 'B', 'C'] {
            let cd = fixture(name);
            let pts = sample_points(cd.n_dim(), cd.m(), 20, 42);
            assert!(check_c_symmetry(&cd, &pts, 1e-9).unwrap().passed());
            let (ln, _) = check_l_n(&cd, &pts, 1e-8).unwrap();
            assert!(ln.passed(), "{name}: {ln:?}");
            assert!(check_r_antisymmetry(&cd, &pts, 1e-10).unwrap().passed());
            let (tl, tc) = check_traces(&cd, &pts, 1e-8).unwrap();
            assert!(tl.passed() && tc.passed(), "{name}: {tl:?} {tc:?}");
            let fs = default_test_functions(cd.n_dim(), cd.m());
            for c in verify_brackets(&cd, &fs, &pts, 1e-8).unwrap() {
                assert!(c.passed(), "{name}: {c:?}");
            }
        }
    }

    #[test]
    fn bracket_example_on_fixture_b() {
        let cd = fixture('B');
        let u = parse_expr("u1", 1, 1).unwrap();
        let (lhs, rhs) = bracket_sides(&cd, BracketRow::XXbar, &u);
        assert!((at(&cd, &lhs[0], ONE, &[ONE]) - ONE).norm() < 1e-13);
        assert!((at(&cd, &rhs[0], ONE, &[ONE]) - ONE).norm() < 1e-13);
    }

    #[test]
    fn kahler_verdicts() {
        assert!(is_kahler(&fixture('A'), 20, 42, 1e-9).unwrap());
        assert!(is_kahler(&fixture('B'), 20, 42, 1e-9).unwrap());
        assert!(!is_kahler(&fixture('C'), 20, 42, 1e-9).unwrap());
    }
}

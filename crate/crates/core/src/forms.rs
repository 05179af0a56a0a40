//! Horizontal `(p, q)`-forms: inner products, the horizontal differentials,
//! the adjoint `∂̄*ʰ` and the horizontal Laplacian `□ʰ`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::calculus::{cov_deriv_h, TensorField, Variance};
use crate::connection::ConnectionData;
use crate::error::{Error, Result};
use crate::expr::{sum, ComplexExpr, EvalPoint, Var};
use crate::finsler::FinslerData;
use crate::quadrature::{integrate, IntegrationDomain};
use crate::report::{compare, CheckResult};
use crate::sample::{random_polynomial, rng};

/// Strictly increasing multi-indices of length `k` over `0..m`, in
/// lexicographic order.
pub fn increasing(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(m, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Every multi-index of length `k` over `0..m`.
fn all_tuples(m: usize, k: usize) -> Vec<Vec<usize>> {
    (0..m.pow(k as u32))
        .map(|mut flat| {
            let mut t = vec![0; k];
            for s in t.iter_mut().rev() {
                *s = flat % m;
                flat /= m;
            }
            t
        })
        .collect()
}

/// Sorts `idx`, returning the sorted indices and whether the permutation was
/// odd; `None` when an index repeats.
pub fn normalize(idx: &[usize]) -> Option<(Vec<usize>, bool)> {
    let mut v = idx.to_vec();
    let mut odd = false;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            odd = !odd;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((v, odd))
    }
}

fn without(idx: &[usize], i: usize) -> Vec<usize> {
    idx.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect()
}

fn sign(i: usize) -> ComplexExpr {
    ComplexExpr::real(if i.is_multiple_of(2) { 1.0 } else { -1.0 })
}

/// `Ψ = 1/(p!q!) ψ_{A_pB̄_q}𝒵^{A_p}∧𝒵^{B̄_q}`, stored on strictly increasing
/// `(A, B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalForm {
    pub m: usize,
    pub p: usize,
    pub q: usize,
    coeffs: BTreeMap<(Vec<usize>, Vec<usize>), ComplexExpr>,
}

impl HorizontalForm {
    pub fn zero(m: usize, p: usize, q: usize) -> Result<Self> {
        if p > m || q > m {
            return Err(Error::Degree(format!("degree ({p}, {q}) exceeds rank {m}")));
        }
        Ok(HorizontalForm { m, p, q, coeffs: BTreeMap::new() })
    }

    /// A `(0, 0)`-form.
    pub fn scalar(m: usize, f: ComplexExpr) -> Self {
        let mut form = HorizontalForm { m, p: 0, q: 0, coeffs: BTreeMap::new() };
        form.coeffs.insert((vec![], vec![]), f);
        form
    }

    /// Stores `ψ_{AB}`; both multi-indices must be strictly increasing.
    pub fn set(&mut self, a: Vec<usize>, b: Vec<usize>, e: ComplexExpr) -> Result<()> {
        if a.len() != self.p || b.len() != self.q {
            return Err(Error::Degree(format!(
                "index lengths ({}, {}) do not match degree ({}, {})",
                a.len(),
                b.len(),
                self.p,
                self.q
            )));
        }
        let ok = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|&i| i < self.m);
        if !ok(&a) || !ok(&b) {
            return Err(Error::Invalid(format!(
                "multi-indices {a:?}|{b:?} must be strictly increasing and below {}",
                self.m
            )));
        }
        if e.is_zero() {
            self.coeffs.remove(&(a, b));
        } else {
            self.coeffs.insert((a, b), e);
        }
        Ok(())
    }

    /// `ψ_{AB}` at any multi-index, antisymmetrized; repeated indices read 0.
    pub fn coeff(&self, a: &[usize], b: &[usize]) -> ComplexExpr {
        let (Some((a, sa)), Some((b, sb))) = (normalize(a), normalize(b)) else {
            return ComplexExpr::zero();
        };
        match self.coeffs.get(&(a, b)) {
            Some(e) if sa != sb => -e,
            Some(e) => e.clone(),
            None => ComplexExpr::zero(),
        }
    }

    /// All increasing `(A, B)` of this degree, stored or not.
    pub fn keys(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let bs = increasing(self.m, self.q);
        increasing(self.m, self.p).into_iter().flat_map(|a| bs.iter().map(move |b| (a.clone(), b.clone()))).collect()
    }

    /// Stored nonzero coefficients in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&(Vec<usize>, Vec<usize>), &ComplexExpr)> {
        self.coeffs.iter()
    }

    /// Coefficients on every increasing key, zeros included.
    pub fn dense(&self) -> Vec<ComplexExpr> {
        self.keys().iter().map(|(a, b)| self.coeff(a, b)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn from_fn(m: usize, p: usize, q: usize, f: impl Fn(&[usize], &[usize]) -> ComplexExpr) -> Result<Self> {
        let mut out = Self::zero(m, p, q)?;
        for (a, b) in out.keys() {
            let e = f(&a, &b);
            out.set(a, b, e)?;
        }
        Ok(out)
    }

    /// `(p, q)`-form as a covariant tensor of variance `(p, q, 0, 0)`.
    pub fn to_tensor(&self) -> TensorField {
        let comps =
            all_tuples(self.m, self.p + self.q).into_iter().map(|t| self.coeff(&t[..self.p], &t[self.p..])).collect();
        TensorField { m: self.m, variance: Variance::new(self.p, self.q, 0, 0), components: comps }
    }

    fn check_same_degree(&self, other: &HorizontalForm) -> Result<()> {
        if (self.m, self.p, self.q) != (other.m, other.p, other.q) {
            return Err(Error::Degree(format!(
                "degrees ({}, {}) and ({}, {}) differ",
                self.p, self.q, other.p, other.q
            )));
        }
        Ok(())
    }
}

/// `φ^{ĀB} = φ_{μ…ν̄…}h^{ᾱμ}…h^{ν̄β}…`.
fn raised(phi: &HorizontalForm, a: &[usize], b: &[usize], fd: &FinslerData) -> ComplexExpr {
    let (m, p, q) = (phi.m, phi.p, phi.q);
    let k = &fd.h_inv;
    sum(all_tuples(m, p + q).into_iter().filter_map(|t| {
        let c = phi.coeff(&t[..p], &t[p..]);
        if c.is_zero() {
            return None;
        }
        let mut term = c;
        for (i, &mu) in t[..p].iter().enumerate() {
            term = term * &k[a[i]][mu];
        }
        for (j, &nu) in t[p..].iter().enumerate() {
            term = term * &k[nu][b[j]];
        }
        Some(term)
    }))
}

/// `<Ψ, Φ> = Σ_{A,B increasing} ψ_{AB}·conj(φ^{ĀB})`.
pub fn inner_product_pointwise(psi: &HorizontalForm, phi: &HorizontalForm, fd: &FinslerData) -> Result<ComplexExpr> {
    psi.check_same_degree(phi)?;
    Ok(sum(psi.keys().into_iter().filter_map(|(a, b)| {
        let c = psi.coeff(&a, &b);
        (!c.is_zero()).then(|| c * raised(phi, &a, &b, fd).conj())
    })))
}

/// `(Ψ, Φ) = ∫<Ψ, Φ> det_h²` over `dom`.
pub fn global_inner_product(
    psi: &HorizontalForm,
    phi: &HorizontalForm,
    fd: &FinslerData,
    dom: &IntegrationDomain,
) -> Result<Complex64> {
    integrate(&inner_product_pointwise(psi, phi, fd)?, &fd.det_h.powi(2), dom)
}

/// `(∂ʰΨ)_{A_{p+1}B} = Σᵢ(−1)^{i−1}δ_{αᵢ}ψ_{…α̂ᵢ…B}`.
pub fn del_h(psi: &HorizontalForm, cd: &ConnectionData) -> Result<HorizontalForm> {
    if psi.p >= psi.m {
        return Err(Error::Degree(format!("del_h needs p < m, got p = {}", psi.p)));
    }
    HorizontalForm::from_fn(psi.m, psi.p + 1, psi.q, |a, b| {
        sum((0..a.len()).map(|i| sign(i) * cd.delta(&psi.coeff(&without(a, i), b), a[i], false)))
    })
}

/// `(∂̄ʰΨ)_{A B_{q+1}} = (−1)^p Σᵢ(−1)^{i−1}δ_{β̄ᵢ}ψ_{A…β̂ᵢ…}`.
pub fn delbar_h(psi: &HorizontalForm, cd: &ConnectionData) -> Result<HorizontalForm> {
    if psi.q >= psi.m {
        return Err(Error::Degree(format!("delbar_h needs q < m, got q = {}", psi.q)));
    }
    HorizontalForm::from_fn(psi.m, psi.p, psi.q + 1, |a, b| {
        sign(psi.p) * sum((0..b.len()).map(|i| sign(i) * cd.delta(&psi.coeff(a, &without(b, i)), b[i], true)))
    })
}

/// `(∂̄*ʰΦ)_{A B_{q−1}} = (−1)^{p+1}h^{ε̄γ}δ_γ(φ_{Aε̄β̄₂…β̄_q})`.
pub fn delbar_adjoint(phi: &HorizontalForm, cd: &ConnectionData) -> Result<HorizontalForm> {
    if phi.q == 0 {
        return Err(Error::Degree("delbar_adjoint needs q >= 1".into()));
    }
    let m = phi.m;
    HorizontalForm::from_fn(m, phi.p, phi.q - 1, |a, b| {
        sign(phi.p + 1)
            * sum((0..m).flat_map(|e| {
                let mut eb = vec![e];
                eb.extend_from_slice(b);
                let c = phi.coeff(a, &eb);
                let live = !c.is_zero();
                (0..m).filter(move |_| live).map(move |g| cd.k(e, g) * cd.delta(&c, g, false))
            }))
    })
}

/// The raised-index expression of `∂̄*ʰ`: raise every index, apply
/// `−(−1)^p h⁻²δ_{β₁}(φ^{Āβ₁…}h²)`, lower again. Differs from
/// [`delbar_adjoint`] unless `δ` commutes with the metric.
pub fn delbar_adjoint_raised(phi: &HorizontalForm, cd: &ConnectionData) -> Result<HorizontalForm> {
    if phi.q == 0 {
        return Err(Error::Degree("delbar_adjoint needs q >= 1".into()));
    }
    let (m, p, q) = (phi.m, phi.p, phi.q);
    let fd = &cd.fd;
    let h2 = fd.det_h.powi(2);
    // S^{Ā B''} for every tuple
    let upper: BTreeMap<Vec<usize>, ComplexExpr> = all_tuples(m, p + q - 1)
        .into_iter()
        .map(|t| {
            let (a, b) = t.split_at(p);
            let s = sum((0..m).map(|b1| {
                let mut bb = vec![b1];
                bb.extend_from_slice(b);
                let r = raised(phi, a, &bb, fd);
                if r.is_zero() {
                    r
                } else {
                    cd.delta(&(r * &h2), b1, false)
                }
            }));
            (t, -sign(p) * s / &h2)
        })
        .collect();
    HorizontalForm::from_fn(m, p, q - 1, |mu, nu| {
        sum(upper.iter().filter(|(_, s)| !s.is_zero()).map(|(t, s)| {
            let (al, be) = t.split_at(p);
            let mut term = s.clone();
            for i in 0..p {
                term = term * &fd.h[mu[i]][al[i]];
            }
            for j in 0..q - 1 {
                term = term * &fd.h[be[j]][nu[j]];
            }
            term
        }))
    })
}

/// `(□ʰΦ)_{AB} = −h^{ε̄γ}(δ_γδ_ε̄φ_{AB} − Σᵢ(−1)^{i−1}[δ_γ, δ_β̄ᵢ]φ_{Aε̄β̄₁…β̂ᵢ…})`.
pub fn box_h(phi: &HorizontalForm, cd: &ConnectionData) -> Result<HorizontalForm> {
    let m = phi.m;
    HorizontalForm::from_fn(m, phi.p, phi.q, |a, b| {
        let c = phi.coeff(a, b);
        -sum((0..m).flat_map(|e| {
            let de = cd.delta(&c, e, true);
            (0..m).map(move |g| {
                let mut inner = vec![cd.delta(&de, g, false)];
                for i in 0..b.len() {
                    let mut eb = vec![e];
                    eb.extend(without(b, i));
                    let f = phi.coeff(a, &eb);
                    if f.is_zero() {
                        continue;
                    }
                    let comm =
                        cd.delta(&cd.delta(&f, b[i], true), g, false) - cd.delta(&cd.delta(&f, g, false), b[i], true);
                    inner.push(-(sign(i) * comm));
                }
                cd.k(e, g) * sum(inner)
            })
        }))
    })
}

/// `□ʰ` on a Kähler algebroid:
/// `−h^{ε̄γ}∇_γ∇_ε̄φ_{AB} + Σᵢh^{ε̄γ}[∇_γ, ∇_β̄ᵢ]φ_{A…ε̄…}`, with `ε̄` in slot `i`.
pub fn box_h_kahler(phi: &HorizontalForm, cd: &ConnectionData) -> Result<HorizontalForm> {
    let (m, p) = (phi.m, phi.p);
    let t = phi.to_tensor();
    let bar: Vec<TensorField> = (0..m).map(|e| cov_deriv_h(&t, e, true, cd)).collect();
    let unbar: Vec<TensorField> = (0..m).map(|g| cov_deriv_h(&t, g, false, cd)).collect();
    // second[g][e] = ∇_γ∇_ε̄ T, swapped[e][g] = ∇_ε̄∇_γ T
    let second: Vec<Vec<TensorField>> =
        (0..m).map(|g| bar.iter().map(|d| cov_deriv_h(d, g, false, cd)).collect()).collect();
    let swapped: Vec<Vec<TensorField>> =
        (0..m).map(|e| unbar.iter().map(|d| cov_deriv_h(d, e, true, cd)).collect()).collect();
    HorizontalForm::from_fn(m, p, phi.q, |a, b| {
        let at = |tf: &TensorField, bb: &[usize]| {
            let mut idx = a.to_vec();
            idx.extend_from_slice(bb);
            tf.get(&idx).clone()
        };
        sum((0..m).flat_map(|e| {
            let (second, swapped) = (&second, &swapped);
            (0..m).map(move |g| {
                let mut terms = vec![-at(&second[g][e], b)];
                for i in 0..b.len() {
                    let mut eb = b.to_vec();
                    eb[i] = e;
                    terms.push(at(&second[g][b[i]], &eb) - at(&swapped[b[i]][g], &eb));
                }
                cd.k(e, g) * sum(terms)
            })
        }))
    })
}

fn add_forms(x: HorizontalForm, y: HorizontalForm) -> Result<HorizontalForm> {
    x.check_same_degree(&y)?;
    HorizontalForm::from_fn(x.m, x.p, x.q, |a, b| x.coeff(a, b) + y.coeff(a, b))
}

/// `∂̄ʰ∂̄*ʰΦ + ∂̄*ʰ∂̄ʰΦ`; a term whose operator leaves the degree range is 0.
pub fn box_h_composition(phi: &HorizontalForm, cd: &ConnectionData) -> Result<HorizontalForm> {
    let first =
        if phi.q >= 1 { delbar_h(&delbar_adjoint(phi, cd)?, cd)? } else { HorizontalForm::zero(phi.m, phi.p, phi.q)? };
    let second = if phi.q < phi.m {
        delbar_adjoint(&delbar_h(phi, cd)?, cd)?
    } else {
        HorizontalForm::zero(phi.m, phi.p, phi.q)?
    };
    add_forms(first, second)
}

/// `(p, q) → (q, p)` with coefficients `(−1)^{pq}conj(ψ_{AB})` on `(B, A)`.
pub fn conjugate_form(psi: &HorizontalForm) -> HorizontalForm {
    let s = sign(psi.p * psi.q);
    let mut out = HorizontalForm { m: psi.m, p: psi.q, q: psi.p, coeffs: BTreeMap::new() };
    for ((a, b), e) in psi.entries() {
        out.coeffs.insert((b.clone(), a.clone()), &s * e.conj());
    }
    out
}

/// `∂*ʰΨ = conj(∂̄*ʰ(conj Ψ))`.
pub fn del_adjoint(psi: &HorizontalForm, cd: &ConnectionData) -> Result<HorizontalForm> {
    Ok(conjugate_form(&delbar_adjoint(&conjugate_form(psi), cd)?))
}

/// `count` forms of degree `(p, q)` with random polynomial coefficients.
pub fn random_forms(n: usize, m: usize, p: usize, q: usize, count: usize, seed: u64) -> Result<Vec<HorizontalForm>> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let mut form = HorizontalForm::zero(m, p, q)?;
            for (a, b) in form.keys() {
                let e = random_polynomial(n, m, 2, 4, &mut r);
                form.set(a, b, e)?;
            }
            Ok(form)
        })
        .collect()
}

/// Random forms multiplied by `exp(−|z|² − |u|²)`, for global integrals.
pub fn random_decaying_forms(
    n: usize,
    m: usize,
    p: usize,
    q: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<HorizontalForm>> {
    let gauss = gaussian(n, m);
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let mut form = HorizontalForm::zero(m, p, q)?;
            for (a, b) in form.keys() {
                let e = random_polynomial(n, m, 1, 3, &mut r) * &gauss;
                form.set(a, b, e)?;
            }
            Ok(form)
        })
        .collect()
}

/// `exp(−Σ zᵏz̄ᵏ − Σ u^αū^α)`.
pub fn gaussian(n: usize, m: usize) -> ComplexExpr {
    let z = (0..n).map(|k| ComplexExpr::var(Var::z(k)) * ComplexExpr::var(Var::zbar(k)));
    let u = (0..m).map(|a| ComplexExpr::var(Var::u(a)) * ComplexExpr::var(Var::ubar(a)));
    (-sum(z.chain(u))).exp()
}

type FormOp = fn(&HorizontalForm, &ConnectionData) -> Result<HorizontalForm>;

/// Two form operators compared componentwise over `forms`.
pub fn compare_operators(
    name: &str,
    cd: &ConnectionData,
    forms: &[HorizontalForm],
    (left, right): (FormOp, FormOp),
    points: &[EvalPoint],
    tol: f64,
) -> Result<CheckResult> {
    let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
    for f in forms {
        lhs.extend(left(f, cd)?.dense());
        rhs.extend(right(f, cd)?.dense());
    }
    compare(name, &lhs, &rhs, points, tol)
}

/// `□ʰ` from the Theorem against the direct composition.
pub fn check_composition(
    cd: &ConnectionData,
    forms: &[HorizontalForm],
    points: &[EvalPoint],
    tol: f64,
) -> Result<CheckResult> {
    compare_operators("box composition", cd, forms, (box_h, box_h_composition), points, tol)
}

/// The two expressions of `∂̄*ʰ`.
pub fn check_adjoint_paths(
    cd: &ConnectionData,
    forms: &[HorizontalForm],
    points: &[EvalPoint],
    tol: f64,
) -> Result<CheckResult> {
    compare_operators("adjoint paths", cd, forms, (delbar_adjoint, delbar_adjoint_raised), points, tol)
}

/// `box_h` against `box_h_kahler`.
pub fn check_kahler_box(
    cd: &ConnectionData,
    forms: &[HorizontalForm],
    points: &[EvalPoint],
    tol: f64,
) -> Result<CheckResult> {
    compare_operators("kahler box", cd, forms, (box_h, box_h_kahler), points, tol)
}

/// `box_h_kahler` against the direct composition.
pub fn check_kahler_composition(
    cd: &ConnectionData,
    forms: &[HorizontalForm],
    points: &[EvalPoint],
    tol: f64,
) -> Result<CheckResult> {
    compare_operators("kahler box composition", cd, forms, (box_h_kahler, box_h_composition), points, tol)
}

/// `max |(∂̄ʰΨ, Φ) − (Ψ, ∂̄*ʰΦ)|` over the pairs.
pub fn check_global_adjointness(
    cd: &ConnectionData,
    pairs: &[(HorizontalForm, HorizontalForm)],
    dom: &IntegrationDomain,
    tol: f64,
) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for (psi, phi) in pairs {
        let left = global_inner_product(&delbar_h(psi, cd)?, phi, &cd.fd, dom)?;
        let right = global_inner_product(psi, &delbar_adjoint(phi, cd)?, &cd.fd, dom)?;
        worst = crate::report::nan_max(worst, (left - right).norm());
    }
    Ok(CheckResult::measured("global adjointness", worst, pairs.len(), tol))
}

//! Covariant derivatives of horizontal tensors, gradients, divergences,
//! function Laplacians and the volume density.

use crate::connection::ConnectionData;
use crate::error::{Error, Result};
use crate::expr::{sum, ComplexExpr, EvalPoint};
use crate::finsler::FinslerData;
use crate::report::{compare, CheckResult, ValidationReport};
use crate::sample::sample_points;

/// Index counts `(p, q, r, s)`: unbarred covariant, barred covariant,
/// unbarred contravariant, barred contravariant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Variance {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
}

impl Variance {
    pub const SCALAR: Variance = Variance { p: 0, q: 0, r: 0, s: 0 };

    pub fn new(p: usize, q: usize, r: usize, s: usize) -> Self {
        Variance { p, q, r, s }
    }

    pub fn rank(&self) -> usize {
        self.p + self.q + self.r + self.s
    }

    /// `(barred, contravariant)` for slot `i`.
    fn slot_kind(&self, i: usize) -> (bool, bool) {
        if i < self.p {
            (false, false)
        } else if i < self.p + self.q {
            (true, false)
        } else if i < self.p + self.q + self.r {
            (false, true)
        } else {
            (true, true)
        }
    }
}

/// Dense components, row-major over the slots in `(p, q, r, s)` order.
#[derive(Clone, Debug)]
pub struct TensorField {
    pub m: usize,
    pub variance: Variance,
    pub components: Vec<ComplexExpr>,
}

impl TensorField {
    pub fn new(m: usize, variance: Variance, components: Vec<ComplexExpr>) -> Result<Self> {
        let want = m.pow(variance.rank() as u32);
        if components.len() != want {
            return Err(Error::Dimension(format!(
                "tensor of rank {} over m = {m} needs {want} components, got {}",
                variance.rank(),
                components.len()
            )));
        }
        Ok(TensorField { m, variance, components })
    }

    pub fn scalar(m: usize, f: ComplexExpr) -> Self {
        TensorField { m, variance: Variance::SCALAR, components: vec![f] }
    }

    /// `h_{αβ̄}` as a `(1, 1, 0, 0)` tensor.
    pub fn metric(fd: &FinslerData) -> Self {
        let m = fd.m();
        let components = (0..m).flat_map(|a| (0..m).map(move |b| (a, b))).map(|(a, b)| fd.h[a][b].clone()).collect();
        TensorField { m, variance: Variance::new(1, 1, 0, 0), components }
    }

    pub fn rank(&self) -> usize {
        self.variance.rank()
    }

    pub fn index_of(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.m + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.rank()];
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.m;
            flat /= self.m;
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> &ComplexExpr {
        &self.components[self.index_of(idx)]
    }
}

/// Which family of operators a covariant derivative uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Horizontal,
    Vertical,
}

fn cov_deriv(t: &TensorField, gamma: usize, barred: bool, cd: &ConnectionData, family: Family) -> TensorField {
    let coef = match family {
        Family::Horizontal => &cd.l,
        Family::Vertical => &cd.c,
    };
    // Γ^a_{bγ}, conjugated in the barred direction.
    let gamma_coef = |a: usize, b: usize| -> ComplexExpr {
        if barred {
            coef[a][b][gamma].conj()
        } else {
            coef[a][b][gamma].clone()
        }
    };
    let m = t.m;
    let components = (0..t.components.len())
        .map(|flat| {
            let idx = t.multi_index(flat);
            let base = match family {
                Family::Horizontal => cd.delta(&t.components[flat], gamma, barred),
                Family::Vertical => cd.vdot(&t.components[flat], gamma, barred),
            };
            let mut terms = vec![base];
            for (slot, &own) in idx.iter().enumerate() {
                let (slot_barred, contra) = t.variance.slot_kind(slot);
                if slot_barred != barred {
                    continue;
                }
                for e in 0..m {
                    let mut j = idx.clone();
                    j[slot] = e;
                    let te = t.get(&j);
                    if te.is_zero() {
                        continue;
                    }
                    if contra {
                        terms.push(te * gamma_coef(own, e));
                    } else {
                        terms.push(-(te * gamma_coef(e, own)));
                    }
                }
            }
            sum(terms)
        })
        .collect();
    TensorField { m, variance: t.variance, components }
}

/// `∇_{𝒳_γ} T` or `∇_{𝒳_γ̄} T`.
pub fn cov_deriv_h(t: &TensorField, gamma: usize, barred: bool, cd: &ConnectionData) -> TensorField {
    cov_deriv(t, gamma, barred, cd, Family::Horizontal)
}

/// `∇_{𝒱_γ} T` or `∇_{𝒱_γ̄} T`.
pub fn cov_deriv_v(t: &TensorField, gamma: usize, barred: bool, cd: &ConnectionData) -> TensorField {
    cov_deriv(t, gamma, barred, cd, Family::Vertical)
}

/// Coefficients of `Z = Zh^α𝒳_α + Zv^α𝒱_α + Zhbar^α𝒳_ᾱ + Zvbar^α𝒱_ᾱ`.
#[derive(Clone, Debug)]
pub struct SectionField {
    pub zh: Vec<ComplexExpr>,
    pub zv: Vec<ComplexExpr>,
    pub zhbar: Vec<ComplexExpr>,
    pub zvbar: Vec<ComplexExpr>,
}

impl SectionField {
    pub fn zero(m: usize) -> Self {
        let z = vec![ComplexExpr::zero(); m];
        SectionField { zh: z.clone(), zv: z.clone(), zhbar: z.clone(), zvbar: z }
    }

    pub fn horizontal(zh: Vec<ComplexExpr>) -> Self {
        let mut s = Self::zero(zh.len());
        s.zh = zh;
        s
    }

    pub fn vertical(zv: Vec<ComplexExpr>) -> Self {
        let mut s = Self::zero(zv.len());
        s.zv = zv;
        s
    }

    pub fn m(&self) -> usize {
        self.zh.len()
    }

    pub fn is_horizontal(&self) -> bool {
        all_zero(&self.zv) && all_zero(&self.zhbar) && all_zero(&self.zvbar)
    }

    pub fn is_vertical(&self) -> bool {
        all_zero(&self.zh) && all_zero(&self.zhbar) && all_zero(&self.zvbar)
    }

    /// `Z(f)`.
    pub fn apply(&self, f: &ComplexExpr, cd: &ConnectionData) -> ComplexExpr {
        sum((0..self.m()).flat_map(|a| {
            [
                &self.zh[a] * cd.delta(f, a, false),
                &self.zv[a] * cd.vdot(f, a, false),
                &self.zhbar[a] * cd.delta(f, a, true),
                &self.zvbar[a] * cd.vdot(f, a, true),
            ]
        }))
    }

    /// `𝒞^h = Z^α𝒞_α`.
    pub fn structure_contraction(&self, cd: &ConnectionData) -> ComplexExpr {
        sum((0..self.m()).map(|a| &self.zh[a] * &cd.s_trace[a]))
    }

    fn check_dim(&self, cd: &ConnectionData) -> Result<()> {
        let m = cd.m();
        if [&self.zh, &self.zv, &self.zhbar, &self.zvbar].iter().any(|b| b.len() != m) {
            return Err(Error::Dimension(format!("section blocks must have {m} components")));
        }
        Ok(())
    }
}

fn all_zero(v: &[ComplexExpr]) -> bool {
    v.iter().all(ComplexExpr::is_zero)
}

/// `(δ_α f, ∂̇_α f, δ_ᾱ f, ∂̇_ᾱ f)` as four covectors.
pub fn differential_split(f: &ComplexExpr, cd: &ConnectionData) -> [TensorField; 4] {
    let m = cd.m();
    let covector = |barred_slot: bool, comps: Vec<ComplexExpr>| TensorField {
        m,
        variance: if barred_slot { Variance::new(0, 1, 0, 0) } else { Variance::new(1, 0, 0, 0) },
        components: comps,
    };
    [
        covector(false, (0..m).map(|a| cd.delta(f, a, false)).collect()),
        covector(false, (0..m).map(|a| cd.vdot(f, a, false)).collect()),
        covector(true, (0..m).map(|a| cd.delta(f, a, true)).collect()),
        covector(true, (0..m).map(|a| cd.vdot(f, a, true)).collect()),
    ]
}

/// `grad^h f = h^{γ̄α}(δ_γ̄ f)𝒳_α`.
pub fn grad_h(f: &ComplexExpr, cd: &ConnectionData) -> SectionField {
    let m = cd.m();
    let d: Vec<ComplexExpr> = (0..m).map(|g| cd.delta(f, g, true)).collect();
    SectionField::horizontal((0..m).map(|a| sum((0..m).map(|g| cd.k(g, a) * &d[g]))).collect())
}

/// `grad^v f = h^{ε̄β}(∂̇_ε̄ f)𝒱_β`.
pub fn grad_v(f: &ComplexExpr, cd: &ConnectionData) -> SectionField {
    let m = cd.m();
    let d: Vec<ComplexExpr> = (0..m).map(|g| cd.vdot(f, g, true)).collect();
    SectionField::vertical((0..m).map(|a| sum((0..m).map(|g| cd.k(g, a) * &d[g]))).collect())
}

/// `∇_{𝒳_α}Z^α` summed over `α`.
pub fn horizontal_cov_divergence(zh: &[ComplexExpr], cd: &ConnectionData) -> ComplexExpr {
    let t = TensorField { m: cd.m(), variance: Variance::new(0, 0, 1, 0), components: zh.to_vec() };
    sum((0..cd.m()).map(|a| cov_deriv_h(&t, a, false, cd).components[a].clone()))
}

/// `Z^α L_α`.
pub fn l_contraction(zh: &[ComplexExpr], cd: &ConnectionData) -> ComplexExpr {
    sum(zh.iter().zip(&cd.l_trace).map(|(z, l)| z * l))
}

/// `div^h Z = ∇_{𝒳_α}Z^α − Z^αL_α − Z^α𝒞_α`.
pub fn div_h(z: &SectionField, cd: &ConnectionData) -> Result<ComplexExpr> {
    z.check_dim(cd)?;
    if !z.is_horizontal() {
        return Err(Error::WrongBlock("div_h expects a purely horizontal section"));
    }
    Ok(horizontal_cov_divergence(&z.zh, cd) - l_contraction(&z.zh, cd) - z.structure_contraction(cd))
}

/// `div^v Z = ∇_{𝒱_α}V^α + V^αC_α`.
pub fn div_v(z: &SectionField, cd: &ConnectionData) -> Result<ComplexExpr> {
    z.check_dim(cd)?;
    if !z.is_vertical() {
        return Err(Error::WrongBlock("div_v expects a purely vertical section"));
    }
    let t = TensorField { m: cd.m(), variance: Variance::new(0, 0, 1, 0), components: z.zv.clone() };
    let nabla = sum((0..cd.m()).map(|a| cov_deriv_v(&t, a, false, cd).components[a].clone()));
    Ok(nabla + sum(z.zv.iter().zip(&cd.c_trace).map(|(v, c)| v * c)))
}

/// `(1/h)δ_α[h·h^{γ̄α}(δ_γ̄ f)] − h^{γ̄α}(δ_γ̄ f)𝒞_α` with `h = det_h`.
pub fn laplacian_h(f: &ComplexExpr, cd: &ConnectionData) -> ComplexExpr {
    let h = &cd.fd.det_h;
    let z = grad_h(f, cd).zh;
    sum((0..cd.m()).map(|a| cd.delta(&(h * &z[a]), a, false))) / h - sum((0..cd.m()).map(|a| &z[a] * &cd.s_trace[a]))
}

/// `(1/h)∂̇_α[h·h^{γ̄α}(∂̇_γ̄ f)] + h^{γ̄α}(∂̇_γ̄ f)C_α`.
pub fn laplacian_v(f: &ComplexExpr, cd: &ConnectionData) -> ComplexExpr {
    let h = &cd.fd.det_h;
    let v = grad_v(f, cd).zv;
    sum((0..cd.m()).map(|a| cd.vdot(&(h * &v[a]), a, false))) / h + sum((0..cd.m()).map(|a| &v[a] * &cd.c_trace[a]))
}

/// `h^{γ̄α}[∇_{𝒳_α}∇_{𝒳_γ̄}f − 𝒞_α∇_{𝒳_γ̄}f]`.
pub fn laplacian_h_cov(f: &ComplexExpr, cd: &ConnectionData) -> ComplexExpr {
    let m = cd.m();
    let grad = differential_split(f, cd)[2].clone();
    sum((0..m).flat_map(|a| {
        let dd = cov_deriv_h(&grad, a, false, cd);
        let grad = &grad;
        (0..m).map(move |g| cd.k(g, a) * (&dd.components[g] - &cd.s_trace[a] * &grad.components[g]))
    }))
}

/// [`laplacian_h_cov`] minus `Z^αL_α` for `Z = grad^h f`. Expanding
/// `δ_α h^{γ̄α}` shows this is what agrees with [`laplacian_h`] when `L_α ≠ 0`.
pub fn laplacian_h_cov_corrected(f: &ComplexExpr, cd: &ConnectionData) -> ComplexExpr {
    laplacian_h_cov(f, cd) - l_contraction(&grad_h(f, cd).zh, cd)
}

/// `h^{γ̄α}[∇_{𝒱_α}∇_{𝒱_γ̄}f + C_α∇_{𝒱_γ̄}f]`.
pub fn laplacian_v_cov(f: &ComplexExpr, cd: &ConnectionData) -> ComplexExpr {
    let m = cd.m();
    let grad = differential_split(f, cd)[3].clone();
    sum((0..m).flat_map(|a| {
        let dd = cov_deriv_v(&grad, a, false, cd);
        let grad = &grad;
        (0..m).map(move |g| cd.k(g, a) * (&dd.components[g] + &cd.c_trace[a] * &grad.components[g]))
    }))
}

/// `div^h Z + Z^α𝒞_α` against `∇_{𝒳_α}Z^α − Z^αL_α` and against the density
/// form `h⁻²[δ_α(Z^αh²) − Z^αL^β_{βα}h²]`. The reading with `Z^αL_α` in place
/// of `𝒞^h` is reported as a diagnostic.
pub fn divergence_consistency_check(
    z: &SectionField,
    cd: &ConnectionData,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<ValidationReport> {
    let points = sample_points(cd.n_dim(), cd.m(), samples, seed);
    divergence_consistency_at(z, cd, &points, tol)
}

pub fn divergence_consistency_at(
    z: &SectionField,
    cd: &ConnectionData,
    points: &[EvalPoint],
    tol: f64,
) -> Result<ValidationReport> {
    let m = cd.m();
    let div = div_h(z, cd)?;
    let lhs = &div + z.structure_contraction(cd);
    let rhs = horizontal_cov_divergence(&z.zh, cd) - l_contraction(&z.zh, cd);
    let h2 = cd.fd.det_h.powi(2);
    let density = sum((0..m)
        .map(|a| cd.delta(&(&z.zh[a] * &h2), a, false) - &z.zh[a] * sum((0..m).map(|b| cd.l[b][b][a].clone())) * &h2))
        / &h2;
    let proof_line = &div + l_contraction(&z.zh, cd);
    let mut rep = ValidationReport::new();
    rep.push(compare("divergence lemma", std::slice::from_ref(&lhs), std::slice::from_ref(&rhs), points, tol)?);
    rep.push(compare("divergence lemma (density form)", &[lhs], &[density], points, tol)?);
    rep.diagnose(compare("divergence lemma (L_a reading)", &[proof_line], &[rhs], points, tol)?);
    Ok(rep)
}

#[derive(Clone, Debug)]
pub struct VolumeData {
    pub density: ComplexExpr,
}

/// Coefficient `det_h²` of the volume form in the adapted coframe.
pub fn volume_density(fd: &FinslerData) -> VolumeData {
    VolumeData { density: fd.det_h.powi(2) }
}

/// Coordinate and covariant Laplacians agree, horizontally and vertically.
/// The corrected covariant form is reported as a diagnostic.
pub fn check_laplacian_agreement(
    cd: &ConnectionData,
    fs: &[ComplexExpr],
    points: &[EvalPoint],
    tol: f64,
) -> Result<ValidationReport> {
    let coord_h: Vec<ComplexExpr> = fs.iter().map(|f| laplacian_h(f, cd)).collect();
    let cov_h: Vec<ComplexExpr> = fs.iter().map(|f| laplacian_h_cov(f, cd)).collect();
    let fixed_h: Vec<ComplexExpr> = fs.iter().map(|f| laplacian_h_cov_corrected(f, cd)).collect();
    let coord_v: Vec<ComplexExpr> = fs.iter().map(|f| laplacian_v(f, cd)).collect();
    let cov_v: Vec<ComplexExpr> = fs.iter().map(|f| laplacian_v_cov(f, cd)).collect();
    let mut rep = ValidationReport::new();
    rep.push(compare("laplacian_h agreement", &coord_h, &cov_h, points, tol)?);
    rep.push(compare("laplacian_v agreement", &coord_v, &cov_v, points, tol)?);
    rep.diagnose(compare("laplacian_h agreement (minus Z^a L_a)", &coord_h, &fixed_h, points, tol)?);
    Ok(rep)
}

/// `𝒢(Z, grad^h f) = h_{αβ̄}Z^α conj(grad^β)` against `Z(f̄)`; for the
/// real-valued test functions used here that is `Z(f)`.
pub fn check_duality(
    cd: &ConnectionData,
    fs: &[ComplexExpr],
    zs: &[SectionField],
    points: &[EvalPoint],
    tol: f64,
) -> Result<CheckResult> {
    let m = cd.m();
    let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
    for f in fs {
        let g = grad_h(f, cd).zh;
        for z in zs {
            lhs.push(sum((0..m)
                .flat_map(|a| (0..m).map(move |b| (a, b)))
                .map(|(a, b)| &cd.fd.h[a][b] * &z.zh[a] * g[b].conj())));
            rhs.push(z.apply(&f.conj(), cd));
        }
    }
    compare("duality", &lhs, &rhs, points, tol)
}

/// On Kähler data `div^h Z = ∇_{𝒳_α}Z^α − Z^α𝒞_α`.
pub fn check_kahler_divergence(
    cd: &ConnectionData,
    zs: &[SectionField],
    points: &[EvalPoint],
    tol: f64,
) -> Result<CheckResult> {
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for z in zs {
        lhs.push(div_h(z, cd)?);
        rhs.push(horizontal_cov_divergence(&z.zh, cd) - z.structure_contraction(cd));
    }
    compare("kahler divergence", &lhs, &rhs, points, tol)
}

/// `∇_{𝒳_γ}h_{αβ̄} = 0` and `∇_{𝒳_γ̄}h_{αβ̄} = 0`.
pub fn check_metric_compatibility(cd: &ConnectionData, points: &[EvalPoint], tol: f64) -> Result<CheckResult> {
    let h = TensorField::metric(&cd.fd);
    let mut lhs = Vec::new();
    for g in 0..cd.m() {
        for barred in [false, true] {
            lhs.extend(cov_deriv_h(&h, g, barred, cd).components);
        }
    }
    let rhs = vec![ComplexExpr::zero(); lhs.len()];
    compare("metric compatibility", &lhs, &rhs, points, tol)
}

/// `Δ^h(af + bg) = aΔ^h f + bΔ^h g`.
pub fn check_linearity(
    cd: &ConnectionData,
    f: &ComplexExpr,
    g: &ComplexExpr,
    points: &[EvalPoint],
    tol: f64,
) -> Result<CheckResult> {
    let a = ComplexExpr::constant(num_complex::Complex64::new(0.7, -1.3));
    let b = ComplexExpr::constant(num_complex::Complex64::new(-2.1, 0.4));
    let lhs = laplacian_h(&(&a * f + &b * g), cd);
    let rhs = &a * laplacian_h(f, cd) + &b * laplacian_h(g, cd);
    compare("laplacian linearity", &[lhs], &[rhs], points, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::tests::fixture;
    use crate::expr::{eval_expr, fd_deriv, parse_expr, Var};
    use num_complex::Complex64;

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn p(cd: &ConnectionData, z: f64) -> EvalPoint {
        EvalPoint::new(vec![Complex64::new(z, 0.0)], vec![ONE; cd.m()])
    }

    fn val(e: &ComplexExpr, pt: &EvalPoint) -> Complex64 {
        eval_expr(e, pt).unwrap()
    }

    fn ex(cd: &ConnectionData, t: &str) -> ComplexExpr {
        parse_expr(t, cd.n_dim(), cd.m()).unwrap()
    }

    #[test]
    fn covariant_derivative_examples() {
        let b = fixture('B');
        let pt = p(&b, 1.0);
        let u = ex(&b, "u1");
        let d = cov_deriv_h(&TensorField::scalar(1, u.clone()), 0, false, &b);
        assert!((val(&d.components[0], &pt) + ONE).norm() < 1e-13);
        let contra = TensorField::new(1, Variance::new(0, 0, 1, 0), vec![u]).unwrap();
        let d = cov_deriv_h(&contra, 0, false, &b);
        for pt in crate::sample::sample_points(1, 1, 5, 3) {
            assert!(val(&d.components[0], &pt).norm() < 1e-12);
        }
        let cov = TensorField::new(1, Variance::new(1, 0, 0, 0), vec![ex(&b, "conj(u1)")]).unwrap();
        assert!(val(&cov_deriv_v(&cov, 0, false, &b).components[0], &pt).norm() < 1e-13);
        let a = fixture('A');
        let dh = cov_deriv_h(&TensorField::metric(&a.fd), 0, false, &a);
        assert!(dh.components[0].is_zero());
    }

    #[test]
    fn differential_split_examples() {
        let b = fixture('B');
        let pt = EvalPoint::new(vec![Complex64::new(0.5, 0.5)], vec![Complex64::new(1.2, -0.3)]);
        let (z, u) = (pt.z[0], pt.u[0]);
        let parts = differential_split(&ex(&b, "u1*conj(u1)"), &b);
        let zu = Complex64::new(-z.norm_sqr() * u.norm_sqr(), 0.0);
        let want = [zu, u.conj(), zu, u];
        for (t, w) in parts.iter().zip(want) {
            assert!((val(&t.components[0], &pt) - w).norm() < 1e-13);
        }
        for t in differential_split(&ComplexExpr::real(3.0), &b) {
            assert!(t.components[0].is_zero());
        }
    }

    #[test]
    fn gradient_and_divergence_examples() {
        let a = fixture('A');
        let pt = EvalPoint::new(vec![Complex64::new(0.4, 0.2)], vec![Complex64::new(0.9, 0.3)]);
        assert!((val(&grad_h(&ex(&a, "z1*conj(z1)"), &a).zh[0], &pt) - pt.z[0]).norm() < 1e-15);
        assert!((val(&grad_v(&ex(&a, "u1*conj(u1)"), &a).zv[0], &pt) - pt.u[0]).norm() < 1e-15);
        let div = div_h(&SectionField::horizontal(vec![ex(&a, "z1")]), &a).unwrap();
        assert!((val(&div, &pt) - ONE).norm() < 1e-15);
        let div = div_v(&SectionField::vertical(vec![ex(&a, "u1")]), &a).unwrap();
        assert!((val(&div, &pt) - ONE).norm() < 1e-15);
        assert!(matches!(div_h(&SectionField::vertical(vec![ex(&a, "u1")]), &a), Err(Error::WrongBlock(_))));
        assert!(matches!(div_v(&SectionField::horizontal(vec![ex(&a, "u1")]), &a), Err(Error::WrongBlock(_))));

        let b = fixture('B');
        let g = grad_h(&ex(&b, "z1*conj(z1)"), &b);
        assert!((val(&g.zh[0], &p(&b, 1.0)) - (-1.0f64).exp()).norm() < 1e-14);

        let c = fixture('C');
        let z = SectionField::horizontal(vec![ComplexExpr::zero(), ComplexExpr::one()]);
        let d = div_h(&z, &c).unwrap();
        assert!((val(&d, &p(&c, 1.0)) - 3.0).norm() < 1e-13);
        // oracle: δ₂(ln det_h) + 1 via finite differences, at z = 0.7
        let pt = EvalPoint::new(vec![Complex64::new(0.7, 0.0)], vec![ONE, ONE]);
        let ln_det = c.ln_det();
        let oracle = pt.z[0] * fd_deriv(&ln_det, Var::z(0), &pt, 1e-5).unwrap() + 1.0;
        assert!((val(&d, &pt) - oracle).norm() < 1e-8);
    }

    /// `Δ^h f` on fixture C built from numerical derivatives of `det_h` only.
    fn laplacian_oracle_c(z: Complex64) -> Complex64 {
        // ρ = (1, z), f = zz̄, δ_γ̄ f = conj(ρ_γ) z, K = e^{−zz̄} I, h = e^{2zz̄}
        let r = |z: Complex64| [ONE, z];
        let g = |z: Complex64, a: usize| r(z)[a].conj() * z;
        let inner = |w: Complex64, a: usize| (2.0 * w.norm_sqr()).exp() * (-w.norm_sqr()).exp() * g(w, a);
        let step = 1e-5;
        let dz = |a: usize| {
            let dx = (inner(z + step, a) - inner(z - step, a)) / (2.0 * step);
            let dy = (inner(z + Complex64::i() * step, a) - inner(z - Complex64::i() * step, a)) / (2.0 * step);
            0.5 * (dx - Complex64::i() * dy)
        };
        let h = (2.0 * z.norm_sqr()).exp();
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..2 {
            acc += r(z)[a] * dz(a) / h;
        }
        // 𝒞_2 = −1
        acc + (-z.norm_sqr()).exp() * g(z, 1)
    }

    #[test]
    fn laplacian_examples() {
        let a = fixture('A');
        let pt = p(&a, 0.3);
        assert!((val(&laplacian_h(&ex(&a, "z1*conj(z1)"), &a), &pt) - ONE).norm() < 1e-14);
        assert!((val(&laplacian_v(&ex(&a, "u1*conj(u1)"), &a), &pt) - ONE).norm() < 1e-14);
        assert!((val(&laplacian_h_cov(&ex(&a, "z1*conj(z1)"), &a), &pt) - ONE).norm() < 1e-14);

        let b = fixture('B');
        let f = ex(&b, "z1*conj(z1)");
        let e1 = (-1.0f64).exp();
        assert!((val(&laplacian_h(&f, &b), &p(&b, 1.0)) - e1).norm() < 1e-13);
        assert!((val(&laplacian_h_cov(&f, &b), &p(&b, 1.0)) - e1).norm() < 1e-13);

        let c = fixture('C');
        let f = ex(&c, "z1*conj(z1)");
        assert!((val(&laplacian_h(&f, &c), &p(&c, 1.0)) - 5.0 * e1).norm() < 1e-13);
        for z in [Complex64::new(0.4, -0.8), Complex64::new(1.1, 0.2)] {
            let pt = EvalPoint::new(vec![z], vec![ONE, ONE]);
            assert!((val(&laplacian_h(&f, &c), &pt) - laplacian_oracle_c(z)).norm() < 1e-7);
        }
        // the printed covariant form misses Z^α L_α on C
        assert!((val(&laplacian_h_cov(&f, &c), &p(&c, 1.0)) - 3.0 * e1).norm() < 1e-13);
        assert!((val(&laplacian_h_cov_corrected(&f, &c), &p(&c, 1.0)) - 5.0 * e1).norm() < 1e-13);
    }

    #[test]
    fn divergence_consistency_examples() {
        let a = fixture('A');
        let rep =
            divergence_consistency_check(&SectionField::horizontal(vec![ex(&a, "z1")]), &a, 20, 42, 1e-10).unwrap();
        assert!(rep.pass());
        let c = fixture('C');
        let z = SectionField::horizontal(vec![ComplexExpr::zero(), ComplexExpr::one()]);
        let rep = divergence_consistency_check(&z, &c, 20, 42, 1e-10).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert!(rep.diagnostics[0].failed());
        let b = fixture('B');
        let z = SectionField::horizontal(vec![ex(&b, "exp(-z1*conj(z1))")]);
        assert!(divergence_consistency_check(&z, &b, 20, 42, 1e-10).unwrap().pass());
    }

    #[test]
    fn volume_density_examples() {
        let b = fixture('B');
        let v = volume_density(&b.fd);
        assert!((val(&v.density, &p(&b, 1.0)) - 2.0f64.exp()).norm() < 1e-12);
        let c = fixture('C');
        let v = volume_density(&c.fd);
        assert!((val(&v.density, &p(&c, 0.5)) - 1.0f64.exp()).norm() < 1e-12);
        assert!(volume_density(&fixture('A').fd).density.is_one());
    }

    #[test]
    fn properties_on_fixtures() {
        for name in ['A', 'B', 'C'] {
            let cd = fixture(name);
            let pts = crate::sample::sample_points(cd.n_dim(), cd.m(), 20, 42);
            let fs = vec![ex(&cd, "z1*conj(z1)"), ex(&cd, "u1*conj(u1)*exp(z1+conj(z1))")];
            let zs: Vec<SectionField> = (0..cd.m())
                .map(|a| {
                    let mut v = vec![ComplexExpr::zero(); cd.m()];
                    v[a] = ex(&cd, "z1^2 + conj(u1)");
                    SectionField::horizontal(v)
                })
                .collect();
            assert!(check_duality(&cd, &fs, &zs, &pts, 1e-9).unwrap().passed());
            assert!(check_metric_compatibility(&cd, &pts, 1e-8).unwrap().passed());
            assert!(check_linearity(&cd, &fs[0], &fs[1], &pts, 1e-10).unwrap().passed());
            let lap = check_laplacian_agreement(&cd, &fs, &pts, 1e-8).unwrap();
            assert!(lap.checks[1].passed(), "{name}: {lap:?}");
            assert!(lap.diagnostics[0].passed(), "{name}: {lap:?}");
            assert_eq!(lap.checks[0].passed(), name != 'C', "{name}: {lap:?}");
            let kahler = crate::connection::is_kahler(&cd, 20, 42, 1e-9).unwrap();
            assert_eq!(check_kahler_divergence(&cd, &zs, &pts, 1e-9).unwrap().passed(), kahler);
        }
    }
}

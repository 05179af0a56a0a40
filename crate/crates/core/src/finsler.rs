//! Metric tensor `h_{αβ̄} = ∂̇_α ∂̇_β̄ F`, its symbolic inverse and
//! determinant, and the homogeneity and pseudoconvexity diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::algebroid::AlgebroidSpec;
use crate::error::{Error, Result};
use crate::expr::{sum, ComplexExpr, EvalPoint, Tape};
use crate::report::{eval_at_points, nan_max, CheckResult};
use crate::sample::{annulus_value, random_point, rng, sample_points};

pub const MAX_RANK: usize = 4;

/// `h[α][β] = h_{αβ̄}`; `h_inv[σ][β] = h^{σ̄β}`, so that
/// `Σ_σ h_{ασ̄} h^{σ̄β} = δ_α^β`; `det_h = det(h_{αβ̄})`.
#[derive(Clone, Debug)]
pub struct FinslerData {
    pub f: ComplexExpr,
    pub h: Vec<Vec<ComplexExpr>>,
    pub h_inv: Vec<Vec<ComplexExpr>>,
    pub det_h: ComplexExpr,
}

/// The fiber Hessian of `f`. Unlike [`build_finsler`] this never fails, so
/// degenerate metrics can still be diagnosed.
pub fn metric_tensor(spec: &AlgebroidSpec, f: &ComplexExpr) -> Vec<Vec<ComplexExpr>> {
    let m = spec.m();
    (0..m)
        .map(|a| {
            let da = spec.vdot(f, a, false);
            (0..m).map(|b| spec.vdot(&da, b, true)).collect()
        })
        .collect()
}

fn minor(mat: &[Vec<ComplexExpr>], row: usize, col: usize) -> Vec<Vec<ComplexExpr>> {
    mat.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, e)| e.clone()).collect())
        .collect()
}

/// Cofactor expansion along the first row; fine for the `m ≤ 4` cap.
fn determinant(mat: &[Vec<ComplexExpr>]) -> ComplexExpr {
    match mat.len() {
        0 => ComplexExpr::one(),
        1 => mat[0][0].clone(),
        2 => &mat[0][0] * &mat[1][1] - &mat[0][1] * &mat[1][0],
        n => sum((0..n).filter(|&j| !mat[0][j].is_zero()).map(|j| {
            let t = &mat[0][j] * determinant(&minor(mat, 0, j));
            if j % 2 == 0 {
                t
            } else {
                -t
            }
        })),
    }
}

pub fn build_finsler(spec: &AlgebroidSpec, f: ComplexExpr) -> Result<FinslerData> {
    let m = spec.m();
    if m > MAX_RANK {
        return Err(Error::RankTooLarge(m));
    }
    let h = metric_tensor(spec, &f);
    let det_h = determinant(&h);
    if det_h.is_zero() {
        return Err(Error::SingularMetric);
    }
    let h_inv = if m == 1 {
        vec![vec![ComplexExpr::one() / &det_h]]
    } else {
        // inv[i][j] = cofactor(j, i) / det
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let c = determinant(&minor(&h, j, i));
                        let c = if (i + j) % 2 == 0 { c } else { -c };
                        c / &det_h
                    })
                    .collect()
            })
            .collect()
    };
    Ok(FinslerData { f, h, h_inv, det_h })
}

impl FinslerData {
    pub fn m(&self) -> usize {
        self.h.len()
    }

    /// Numeric metric matrix at `p`, rows `α`, columns `β`.
    pub fn metric_at(&self, p: &EvalPoint) -> Result<DMatrix<Complex64>> {
        metric_matrix_at(&self.h, p)
    }
}

fn metric_matrix_at(h: &[Vec<ComplexExpr>], p: &EvalPoint) -> Result<DMatrix<Complex64>> {
    let m = h.len();
    let flat: Vec<ComplexExpr> = h.iter().flatten().cloned().collect();
    let v = Tape::compile(&flat).eval(p)?;
    Ok(DMatrix::from_row_slice(m, m, &v))
}

/// Largest `|F(z, λu) − |λ|² F(z, u)| / (1 + |F(z, u)|)` over seeded
/// `(z, u, λ)`, with `λ` drawn from the sampling annulus.
pub fn homogeneity_residual(f: &ComplexExpr, n: usize, m: usize, samples: usize, seed: u64) -> Result<f64> {
    let tape = Tape::compile(std::slice::from_ref(f));
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p = random_point(n, m, &mut r);
        let lambda = annulus_value(&mut r);
        let scaled = EvalPoint::new(p.z.clone(), p.u.iter().map(|u| lambda * u).collect());
        let base = tape.eval(&p)?[0];
        let moved = tape.eval(&scaled)?[0];
        worst = nan_max(worst, (moved - lambda.norm_sqr() * base).norm() / (1.0 + base.norm()));
    }
    Ok(worst)
}

/// `F(z, λu) = |λ|² F(z, u)` at every sample, within `tol·(1 + |F|)`.
pub fn check_homogeneity(f: &ComplexExpr, n: usize, m: usize, samples: usize, seed: u64, tol: f64) -> Result<bool> {
    Ok(homogeneity_residual(f, n, m, samples, seed)? <= tol)
}

/// Largest Hermitian defect and smallest eigenvalue of `h` over samples.
pub fn metric_spectrum(h: &[Vec<ComplexExpr>], n: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let m = h.len();
    let mut hermitian_defect: f64 = 0.0;
    let mut smallest = f64::INFINITY;
    for p in sample_points(n, m, samples, seed) {
        let mat = metric_matrix_at(h, &p)?;
        let defect = (&mat - mat.adjoint()).iter().fold(0.0, |acc, d| nan_max(acc, d.norm()));
        hermitian_defect = nan_max(hermitian_defect, defect);
        let herm = (&mat + mat.adjoint()).map(|c| c * 0.5);
        let eig = SymmetricEigen::new(herm).eigenvalues;
        for &e in eig.iter() {
            smallest = if e.is_nan() { f64::NAN } else { smallest.min(e) };
        }
    }
    Ok((hermitian_defect, smallest))
}

/// Hermitian within `tol` and smallest eigenvalue above `tol` at every sample.
pub fn check_pseudoconvexity_metric(
    h: &[Vec<ComplexExpr>],
    n: usize,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<bool> {
    let (defect, smallest) = metric_spectrum(h, n, samples, seed)?;
    Ok(defect <= tol && smallest > tol)
}

pub fn check_pseudoconvexity(fd: &FinslerData, n: usize, samples: usize, seed: u64, tol: f64) -> Result<bool> {
    check_pseudoconvexity_metric(&fd.h, n, samples, seed, tol)
}

/// Numeric invariants of a built metric: Hermitian symmetry, the inverse,
/// positivity of the determinant and the Euler relation
/// `Σ_β h_{αβ̄} ū^β = ∂̇_α F`.
pub fn metric_invariants(
    spec: &AlgebroidSpec,
    fd: &FinslerData,
    points: &[EvalPoint],
    tol: f64,
) -> Result<Vec<CheckResult>> {
    let m = spec.m();
    let (mut herm_l, mut herm_r) = (Vec::new(), Vec::new());
    let (mut inv_l, mut inv_r) = (Vec::new(), Vec::new());
    let (mut euler_l, mut euler_r) = (Vec::new(), Vec::new());
    for a in 0..m {
        for b in 0..m {
            herm_l.push(fd.h[a][b].clone());
            herm_r.push(fd.h[b][a].conj());
            inv_l.push(sum((0..m).map(|s| &fd.h[a][s] * &fd.h_inv[s][b])));
            inv_r.push(if a == b { ComplexExpr::one() } else { ComplexExpr::zero() });
        }
        euler_l.push(sum((0..m).map(|b| &fd.h[a][b] * ComplexExpr::var(crate::expr::Var::ubar(b)))));
        euler_r.push(spec.vdot(&fd.f, a, false));
    }
    let mut out = vec![
        crate::report::compare("metric hermitian", &herm_l, &herm_r, points, tol)?,
        crate::report::compare("metric inverse", &inv_l, &inv_r, points, tol)?,
    ];
    let dets = eval_at_points(std::slice::from_ref(&fd.det_h), points)?;
    // Distance from the positive real axis, relative to |det|.
    let worst = dets.iter().fold(0.0, |acc, row| {
        let d = row[0];
        let off = if d.re > 0.0 { d.im.abs() / (1.0 + d.norm()) } else { 1.0 + d.norm() };
        nan_max(acc, off)
    });
    out.push(CheckResult::measured("determinant positive", worst, points.len(), tol));
    out.push(crate::report::compare("euler relation", &euler_l, &euler_r, points, tol)?);
    Ok(out)
}

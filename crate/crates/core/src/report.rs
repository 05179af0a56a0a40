//! Check results and the residual helpers shared by every suite.

use num_complex::Complex64;

use crate::error::Result;
use crate::expr::{ComplexExpr, EvalPoint, Tape};

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_residual: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub status: Status,
}

impl CheckResult {
    /// Passes iff `max_residual <= tolerance`; a NaN residual fails.
    pub fn measured(name: impl Into<String>, max_residual: f64, samples: usize, tolerance: f64) -> Self {
        let status = if max_residual <= tolerance { Status::Pass } else { Status::Fail };
        CheckResult { name: name.into(), max_residual, samples, tolerance, status }
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            max_residual: 0.0,
            samples: 0,
            tolerance: 0.0,
            status: Status::Skipped(reason.into()),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

/// Outcome of a suite. `diagnostics` document alternative readings and never
/// affect [`ValidationReport::pass`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub diagnostics: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// True iff no check failed. Skipped checks do not fail a report.
    pub fn pass(&self) -> bool {
        !self.checks.iter().any(CheckResult::failed)
    }

    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    pub fn diagnose(&mut self, c: CheckResult) {
        self.diagnostics.push(c);
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
        self.diagnostics.extend(other.diagnostics);
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().chain(&self.diagnostics).find(|c| c.name == name)
    }
}

/// `|a − b| / (1 + max(|a|, |b|))`: absolute near zero, relative for large
/// values such as `e^{4|z|²}`.
pub fn scaled_residual(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / (1.0 + a.norm().max(b.norm()))
}

/// Maximum that propagates NaN, so a non-finite residual fails its check.
pub fn nan_max(acc: f64, x: f64) -> f64 {
    if x.is_nan() || acc.is_nan() {
        f64::NAN
    } else {
        acc.max(x)
    }
}

/// Evaluates every expression at every point with one shared tape.
/// Result is indexed `[point][expression]`.
pub fn eval_at_points(exprs: &[ComplexExpr], points: &[EvalPoint]) -> Result<Vec<Vec<Complex64>>> {
    let tape = Tape::compile(exprs);
    points.iter().map(|p| Ok(tape.eval(p)?)).collect()
}

/// Largest scaled residual between paired expressions over `points`.
pub fn max_scaled_residual(lhs: &[ComplexExpr], rhs: &[ComplexExpr], points: &[EvalPoint]) -> Result<f64> {
    assert_eq!(lhs.len(), rhs.len(), "paired expression lists differ in length");
    let all: Vec<ComplexExpr> = lhs.iter().chain(rhs).cloned().collect();
    let k = lhs.len();
    let values = eval_at_points(&all, points)?;
    Ok(values.iter().fold(0.0, |acc, row| (0..k).fold(acc, |acc, i| nan_max(acc, scaled_residual(row[i], row[k + i])))))
}

/// Largest modulus of any expression over `points`.
pub fn max_modulus(exprs: &[ComplexExpr], points: &[EvalPoint]) -> Result<f64> {
    let values = eval_at_points(exprs, points)?;
    Ok(values.iter().flatten().fold(0.0, |acc, v| nan_max(acc, v.norm())))
}

/// Scaled residual check of `lhs[i] = rhs[i]` over `points`.
pub fn compare(
    name: &str,
    lhs: &[ComplexExpr],
    rhs: &[ComplexExpr],
    points: &[EvalPoint],
    tol: f64,
) -> Result<CheckResult> {
    let r = max_scaled_residual(lhs, rhs, points)?;
    Ok(CheckResult::measured(name, r, points.len(), tol))
}

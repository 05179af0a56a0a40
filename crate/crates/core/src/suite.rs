//! The check suites run by the command line and the acceptance tests.

use std::fmt;
use std::str::FromStr;

use crate::algebroid::{validate_algebroid, verify_anchor_brackets, AlgebroidSpec};
use crate::calculus::{
    check_duality, check_kahler_divergence, check_laplacian_agreement, check_linearity, check_metric_compatibility,
    divergence_consistency_at, SectionField,
};
use crate::connection::{
    build_connection, check_c_symmetry, check_l_n, check_r_antisymmetry, check_traces, default_test_functions,
    kahler_residual, verify_brackets, ConnectionData,
};
use crate::error::{Error, Result};
use crate::expr::{ComplexExpr, Var};
use crate::finsler::{build_finsler, homogeneity_residual, metric_invariants, metric_spectrum, metric_tensor};
use crate::forms::{
    check_adjoint_paths, check_composition, check_global_adjointness, check_kahler_box, check_kahler_composition,
    gaussian, random_decaying_forms, random_forms, HorizontalForm,
};
use crate::quadrature::{check_integral_identity, IntegrationDomain, DEFAULT_BUDGET};
use crate::report::{CheckResult, Status, ValidationReport};
use crate::sample::sample_points;

/// A parsed scenario: the algebroid, the Finsler function and named inputs.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub id: String,
    pub spec: AlgebroidSpec,
    pub f: ComplexExpr,
    pub functions: Vec<(String, ComplexExpr)>,
    pub sections: Vec<(String, SectionField)>,
    pub forms: Vec<(String, HorizontalForm)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Options {
    pub samples: usize,
    pub seed: u64,
    /// Identity tolerance.
    pub tol: f64,
    /// Integral tolerance.
    pub int_tol: f64,
    pub box_lo: f64,
    pub box_hi: f64,
    pub grid: usize,
    pub budget: u128,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            samples: 20,
            seed: 42,
            tol: 1e-8,
            int_tol: 1e-3,
            box_lo: -4.0,
            box_hi: 4.0,
            grid: 64,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl Options {
    pub fn domain(&self, n: usize, m: usize) -> Result<IntegrationDomain> {
        Ok(IntegrationDomain::cube(n, m, self.box_lo, self.box_hi, self.grid)?.with_budget(self.budget))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Algebroid,
    Connection,
    Laplace,
    Forms,
    Integrals,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Algebroid, Suite::Connection, Suite::Laplace, Suite::Forms, Suite::Integrals];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebroid => "algebroid",
            Suite::Connection => "connection",
            Suite::Laplace => "laplace",
            Suite::Forms => "forms",
            Suite::Integrals => "integrals",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::Invalid(format!("unknown suite '{s}'")))
    }
}

/// Suite name and its checks.
pub type SuiteResults = Vec<(String, ValidationReport)>;

fn single(c: CheckResult) -> ValidationReport {
    let mut r = ValidationReport::new();
    r.push(c);
    r
}

/// Algebroid axioms, homogeneity of `F` and strict pseudoconvexity. The
/// metric is built only for the pseudoconvexity spectrum, so a singular or
/// indefinite metric is reported rather than raised.
pub fn run_validate(inputs: &Inputs, opts: &Options) -> Result<SuiteResults> {
    let (spec, f) = (&inputs.spec, &inputs.f);
    let algebroid = validate_algebroid(spec, opts.samples, opts.seed, opts.tol)?;
    let homog = homogeneity_residual(f, spec.n(), spec.m(), opts.samples, opts.seed)?;
    let homogeneity = single(CheckResult::measured("homogeneity", homog, opts.samples, opts.tol));
    Ok(vec![
        ("algebroid".into(), algebroid),
        ("homogeneity".into(), homogeneity),
        ("pseudoconvexity".into(), pseudoconvexity(spec, f, opts)?),
    ])
}

fn pseudoconvexity(spec: &AlgebroidSpec, f: &ComplexExpr, opts: &Options) -> Result<ValidationReport> {
    let h = metric_tensor(spec, f);
    let (defect, smallest) = metric_spectrum(&h, spec.n(), opts.samples, opts.seed)?;
    let mut rep = ValidationReport::new();
    rep.push(CheckResult::measured("metric hermitian", defect, opts.samples, opts.tol));
    // positive definite iff the smallest eigenvalue exceeds tol; reported as
    // the residual tol − λ_min against 0
    let mut pd = CheckResult::measured("positive definite", opts.tol - smallest, opts.samples, 0.0);
    if smallest.is_finite() && smallest > opts.tol {
        pd.status = Status::Pass;
    }
    rep.push(pd);
    Ok(rep)
}

/// State shared by the check suites of one scenario.
pub struct Context<'a> {
    pub inputs: &'a Inputs,
    pub opts: &'a Options,
    pub cd: ConnectionData,
    pub test_functions: Vec<ComplexExpr>,
    pub homogeneous: bool,
    pub kahler: bool,
    pub flat: bool,
}

impl<'a> Context<'a> {
    pub fn new(inputs: &'a Inputs, opts: &'a Options) -> Result<Self> {
        let spec = &inputs.spec;
        let fd = build_finsler(spec, inputs.f.clone())?;
        let cd = build_connection(spec, &fd)?;
        let mut test_functions = default_test_functions(spec.n(), spec.m());
        test_functions.extend(inputs.functions.iter().map(|(_, e)| e.clone()));
        let homogeneous = homogeneity_residual(&inputs.f, spec.n(), spec.m(), opts.samples, opts.seed)? <= opts.tol;
        let points = sample_points(spec.n(), spec.m(), opts.samples, opts.seed);
        let kahler = kahler_residual(&cd, &points)? <= opts.tol;
        let flat = cd.n.iter().flatten().all(ComplexExpr::is_zero)
            && cd.l.iter().flatten().flatten().all(ComplexExpr::is_zero)
            && cd.fd.det_h.as_const().is_some();
        Ok(Context { inputs, opts, cd, test_functions, homogeneous, kahler, flat })
    }

    fn points(&self) -> Vec<crate::expr::EvalPoint> {
        sample_points(self.cd.n_dim(), self.cd.m(), self.opts.samples, self.opts.seed)
    }

    /// Named horizontal sections plus `(z₁² + ū₁)𝒳_α` for every `α`.
    fn divergence_sections(&self) -> Vec<(String, SectionField)> {
        let m = self.cd.m();
        let mut out: Vec<(String, SectionField)> =
            self.inputs.sections.iter().filter(|(_, s)| s.is_horizontal()).cloned().collect();
        let coef = ComplexExpr::var(Var::z(0)).powi(2) + ComplexExpr::var(Var::ubar(0));
        for a in 0..m {
            let mut zh = vec![ComplexExpr::zero(); m];
            zh[a] = coef.clone();
            out.push((format!("e{}", a + 1), SectionField::horizontal(zh)));
        }
        out
    }

    pub fn run(&self, suite: Suite) -> Result<ValidationReport> {
        match suite {
            Suite::Algebroid => self.algebroid(),
            Suite::Connection => self.connection(),
            Suite::Laplace => self.laplace(),
            Suite::Forms => self.forms(),
            Suite::Integrals => self.integrals(),
        }
    }

    fn algebroid(&self) -> Result<ValidationReport> {
        let mut rep = ValidationReport::new();
        for (_, r) in run_validate(self.inputs, self.opts)? {
            rep.merge(r);
        }
        let points = self.points();
        rep.push(verify_anchor_brackets(&self.cd.spec, &self.test_functions, &points, self.opts.tol)?);
        for c in metric_invariants(&self.cd.spec, &self.cd.fd, &points, self.opts.tol)? {
            if c.name != "metric hermitian" {
                rep.push(c);
            }
        }
        Ok(rep)
    }

    fn connection(&self) -> Result<ValidationReport> {
        let (cd, tol) = (&self.cd, self.opts.tol);
        let points = self.points();
        let mut rep = ValidationReport::new();
        rep.push(check_c_symmetry(cd, &points, tol)?);
        let (ln, transposed) = check_l_n(cd, &points, tol)?;
        if self.homogeneous {
            rep.push(ln);
        } else {
            rep.push(CheckResult::skipped(ln.name, "inhomogeneous"));
        }
        rep.diagnose(transposed);
        rep.push(check_r_antisymmetry(cd, &points, tol)?);
        let (tl, tc) = check_traces(cd, &points, tol)?;
        rep.push(tl);
        rep.push(tc);
        for c in verify_brackets(cd, &self.test_functions, &points, tol)? {
            rep.push(c);
        }
        rep.diagnose(CheckResult::measured("kahler", kahler_residual(cd, &points)?, points.len(), tol));
        Ok(rep)
    }

    fn laplace(&self) -> Result<ValidationReport> {
        let (cd, tol) = (&self.cd, self.opts.tol);
        let points = self.points();
        let fs = &self.test_functions;
        let mut rep = check_laplacian_agreement(cd, fs, &points, tol)?;
        let sections = self.divergence_sections();
        let zs: Vec<SectionField> = sections.iter().map(|(_, s)| s.clone()).collect();
        rep.push(check_duality(cd, fs, &zs, &points, tol)?);
        rep.push(check_metric_compatibility(cd, &points, tol)?);
        rep.push(check_linearity(cd, &fs[0], &fs[1], &points, tol)?);
        for (name, z) in &sections {
            let sub = divergence_consistency_at(z, cd, &points, tol)?;
            for c in sub.checks {
                rep.push(CheckResult { name: format!("{} [{name}]", c.name), ..c });
            }
            for c in sub.diagnostics {
                rep.diagnose(CheckResult { name: format!("{} [{name}]", c.name), ..c });
            }
        }
        if self.kahler {
            rep.push(check_kahler_divergence(cd, &zs, &points, tol)?);
        } else {
            rep.push(CheckResult::skipped("kahler divergence", "not kahler"));
        }
        Ok(rep)
    }

    /// Five random forms of each degree `(0, 1)` and `(1, 1)`, plus the named forms.
    fn sample_forms(&self) -> Result<Vec<HorizontalForm>> {
        let (n, m) = (self.cd.n_dim(), self.cd.m());
        let mut out = random_forms(n, m, 0, 1, 5, self.opts.seed)?;
        out.extend(random_forms(n, m, 1, 1, 5, self.opts.seed + 1)?);
        out.extend(self.inputs.forms.iter().map(|(_, f)| f.clone()));
        Ok(out)
    }

    fn forms(&self) -> Result<ValidationReport> {
        let (cd, tol) = (&self.cd, self.opts.tol);
        let points = self.points();
        let forms = self.sample_forms()?;
        let with_q: Vec<HorizontalForm> = forms.iter().filter(|f| f.q >= 1).cloned().collect();
        let mut rep = ValidationReport::new();
        rep.push(check_composition(cd, &forms, &points, tol)?);
        rep.push(check_adjoint_paths(cd, &with_q, &points, tol)?);
        if self.kahler {
            rep.push(check_kahler_box(cd, &forms, &points, tol)?);
        } else {
            rep.push(CheckResult::skipped("kahler box", "not kahler"));
        }
        rep.diagnose(check_kahler_composition(cd, &forms, &points, tol)?);
        if self.flat {
            let (n, m) = (cd.n_dim(), cd.m());
            let dom = self.opts.domain(n, m)?;
            let psis = random_decaying_forms(n, m, 0, 0, 3, self.opts.seed + 2)?;
            let phis = random_decaying_forms(n, m, 0, 1, 3, self.opts.seed + 3)?;
            let pairs: Vec<_> = psis.into_iter().zip(phis).collect();
            rep.push(budgeted("global adjointness", check_global_adjointness(cd, &pairs, &dom, self.opts.int_tol))?);
        } else {
            rep.push(CheckResult::skipped("global adjointness", "not flat"));
        }
        Ok(rep)
    }

    /// Named horizontal sections, or `exp(−|z|² − |u|²)𝒳₁` when there are none.
    fn integrals(&self) -> Result<ValidationReport> {
        let (n, m) = (self.cd.n_dim(), self.cd.m());
        let mut sections: Vec<(String, SectionField)> =
            self.inputs.sections.iter().filter(|(_, s)| s.is_horizontal()).cloned().collect();
        if sections.is_empty() {
            let mut zh = vec![ComplexExpr::zero(); m];
            zh[0] = gaussian(n, m);
            sections.push(("gaussian".into(), SectionField::horizontal(zh)));
        }
        let mut rep = ValidationReport::new();
        let dom = match self.opts.domain(n, m) {
            Ok(d) => d,
            Err(e) => {
                rep.push(CheckResult::skipped("int1", e.to_string()));
                return Ok(rep);
            }
        };
        for (name, z) in &sections {
            match check_integral_identity(z, &self.cd, &dom, self.opts.int_tol) {
                Ok(sub) => {
                    for c in sub.checks {
                        rep.push(CheckResult { name: format!("{} [{name}]", c.name), ..c });
                    }
                }
                Err(e @ Error::BudgetExceeded { .. }) => {
                    rep.push(CheckResult::skipped(format!("int1 [{name}]"), e.to_string()))
                }
                Err(e) => return Err(e),
            }
        }
        Ok(rep)
    }
}

/// A quadrature check whose budget overflow is reported as a skip.
fn budgeted(name: &str, r: Result<CheckResult>) -> Result<CheckResult> {
    match r {
        Err(e @ Error::BudgetExceeded { .. }) => Ok(CheckResult::skipped(name, e.to_string())),
        other => other,
    }
}

/// Runs the requested suites in order.
pub fn run_check(inputs: &Inputs, suites: &[Suite], opts: &Options) -> Result<SuiteResults> {
    let ctx = Context::new(inputs, opts)?;
    suites.iter().map(|&s| Ok((s.name().to_string(), ctx.run(s)?))).collect()
}

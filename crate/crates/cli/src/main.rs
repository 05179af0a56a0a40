//! `algebroid`: validate scenarios, print connection tensors, evaluate
//! Laplacians and run identity suites.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or input error.

mod output;
mod point;
mod scenario;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use finsler_algebroid::calculus::{laplacian_h, laplacian_v};
use finsler_algebroid::connection::{build_connection, is_kahler, ConnectionData};
use finsler_algebroid::expr::{eval_expr, ComplexExpr, EvalPoint, ParseError};
use finsler_algebroid::finsler::build_finsler;
use finsler_algebroid::forms::{box_h, box_h_kahler, increasing, HorizontalForm};
use finsler_algebroid::quadrature::{identity_values, IntegrationDomain, DEFAULT_BUDGET};
use finsler_algebroid::suite::{run_check, run_validate, Options, Suite};

use output::{c, CheckReport, FormComponent, FormValue, IntegralReport, ScalarValue, Tensors, Traces};
use scenario::Scenario;

/// Largest expression tree echoed in full.
const MAX_PRINT_NODES: u64 = 4000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{field}: {source}")]
    Expr { field: String, source: ParseError },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] finsler_algebroid::Error),
}

#[derive(Parser)]
#[command(name = "algebroid", version, about = "Complex Finsler algebroid toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Sampling {
    /// Random sample points per identity.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Seed for sample points and random test inputs.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Tolerance for pointwise identities.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct Quadrature {
    /// Integration box for every real coordinate, as `lo..hi`.
    #[arg(long = "box", default_value = "-4..4", allow_hyphen_values = true)]
    bounds: String,
    /// Midpoint cells per real axis.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Largest number of grid points allowed.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    /// Tolerance for integral identities.
    #[arg(long, default_value_t = 1e-3)]
    int_tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    All,
    Algebroid,
    Connection,
    Laplace,
    Forms,
    Integrals,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    H,
    V,
    Box,
    BoxKahler,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::H => "h",
            Kind::V => "v",
            Kind::Box => "box",
            Kind::BoxKahler => "box-kahler",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check algebroid axioms, homogeneity and pseudoconvexity.
    Validate {
        scenario: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Print metric and connection tensors at a point.
    Tensors {
        scenario: PathBuf,
        /// Point such as `z1=1,u1=0.5+2i`.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Evaluate a Laplacian of a function or a named form at a point.
    Laplacian {
        scenario: PathBuf,
        /// Function expression.
        #[arg(long = "fn", conflicts_with = "form", required_unless_present = "form", allow_hyphen_values = true)]
        function: Option<String>,
        /// Name of a form in the scenario.
        #[arg(long)]
        form: Option<String>,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Run identity suites and print a report.
    Check {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        quadrature: Quadrature,
    },
    /// Integrate the divergence identities of a named horizontal section.
    Integrate {
        scenario: PathBuf,
        /// Name of a section in the scenario.
        #[arg(long)]
        field: String,
        #[command(flatten)]
        quadrature: Quadrature,
    },
}

enum Outcome {
    Pass,
    Fail,
}

fn print_json<T: Serialize>(v: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Usage(e.to_string()))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io { path: "stdout".into(), source: e }),
        _ => Ok(()),
    }
}

fn options(sampling: Option<&Sampling>, quad: Option<&Quadrature>) -> Result<Options, CliError> {
    let mut o = Options::default();
    if let Some(s) = sampling {
        if s.samples == 0 {
            return Err(CliError::Usage("--samples must be positive".into()));
        }
        if !s.tol.is_finite() || s.tol <= 0.0 {
            return Err(CliError::Usage("--tol must be positive".into()));
        }
        (o.samples, o.seed, o.tol) = (s.samples, s.seed, s.tol);
    }
    if let Some(q) = quad {
        (o.box_lo, o.box_hi) = point::parse_interval(&q.bounds)?;
        if q.grid == 0 {
            return Err(CliError::Usage("--grid must be positive".into()));
        }
        if !q.int_tol.is_finite() || q.int_tol <= 0.0 {
            return Err(CliError::Usage("--int-tol must be positive".into()));
        }
        (o.grid, o.budget, o.int_tol) = (q.grid, q.budget, q.int_tol);
    }
    Ok(o)
}

fn connection(sc: &Scenario) -> Result<ConnectionData, CliError> {
    let fd = build_finsler(&sc.inputs.spec, sc.inputs.f.clone())?;
    Ok(build_connection(&sc.inputs.spec, &fd)?)
}

fn eval(e: &ComplexExpr, p: &EvalPoint) -> Result<Complex64, CliError> {
    eval_expr(e, p).map_err(|e| CliError::Core(e.into()))
}

fn eval_all(v: &[ComplexExpr], p: &EvalPoint) -> Result<Vec<[f64; 2]>, CliError> {
    v.iter().map(|e| Ok(c(eval(e, p)?))).collect()
}

fn printable(e: &ComplexExpr) -> Option<String> {
    (e.tree_size() <= MAX_PRINT_NODES).then(|| e.to_string())
}

fn form_key(a: &[usize], b: &[usize]) -> String {
    let side = |v: &[usize]| v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",");
    format!("{}|{}", side(a), side(b))
}

fn cmd_validate(path: PathBuf, sampling: Sampling) -> Result<Outcome, CliError> {
    let sc = scenario::load(&path)?;
    let opts = options(Some(&sampling), None)?;
    let report = CheckReport::new(&sc.inputs.id, &run_validate(&sc.inputs, &opts)?, opts.seed);
    print_json(&report)?;
    Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
}

fn cmd_tensors(path: PathBuf, at: String) -> Result<Outcome, CliError> {
    let sc = scenario::load(&path)?;
    let p = point::parse_point(&at, sc.n(), sc.m())?;
    let cd = connection(&sc)?;
    let grid2 = |g: &Vec<Vec<ComplexExpr>>| g.iter().map(|row| eval_all(row, &p)).collect::<Result<Vec<_>, _>>();
    let grid3 = |g: &Vec<Vec<Vec<ComplexExpr>>>| g.iter().map(&grid2).collect::<Result<Vec<_>, _>>();
    let t = Tensors {
        scenario: sc.inputs.id.clone(),
        point: at,
        h: grid2(&cd.fd.h)?,
        h_inv: grid2(&cd.fd.h_inv)?,
        det: c(eval(&cd.fd.det_h, &p)?),
        n: grid2(&cd.n)?,
        l: grid3(&cd.l)?,
        c: grid3(&cd.c)?,
        r: grid3(&cd.r)?,
        traces: Traces {
            l: eval_all(&cd.l_trace, &p)?,
            c: eval_all(&cd.c_trace, &p)?,
            structure: eval_all(&cd.s_trace, &p)?,
        },
    };
    print_json(&t)?;
    Ok(Outcome::Pass)
}

fn cmd_laplacian(
    path: PathBuf,
    function: Option<String>,
    form: Option<String>,
    kind: Kind,
    at: String,
) -> Result<Outcome, CliError> {
    let sc = scenario::load(&path)?;
    let p = point::parse_point(&at, sc.n(), sc.m())?;
    let (input, phi) = match (&function, &form) {
        (Some(text), _) => (text.clone(), HorizontalForm::scalar(sc.m(), sc.expr("--fn", text)?)),
        (None, Some(name)) => (name.clone(), sc.form(name)?.clone()),
        (None, None) => return Err(CliError::Usage("one of --fn or --form is required".into())),
    };
    let cd = connection(&sc)?;
    match kind {
        Kind::H | Kind::V => {
            if phi.p != 0 || phi.q != 0 {
                return Err(CliError::Usage(format!(
                    "--kind {} acts on functions, but '{input}' is a ({}, {}) form",
                    kind.name(),
                    phi.p,
                    phi.q
                )));
            }
            let f = phi.coeff(&[], &[]);
            let e = if matches!(kind, Kind::H) { laplacian_h(&f, &cd) } else { laplacian_v(&f, &cd) };
            print_json(&ScalarValue {
                scenario: sc.inputs.id.clone(),
                kind: kind.name().into(),
                input,
                point: at,
                expression: printable(&e),
                expression_nodes: e.dag_size(),
                value: c(eval(&e, &p)?),
            })?;
        }
        Kind::Box | Kind::BoxKahler => {
            let out = if matches!(kind, Kind::Box) { box_h(&phi, &cd)? } else { box_h_kahler(&phi, &cd)? };
            let keys: Vec<_> = increasing(sc.m(), out.p)
                .into_iter()
                .flat_map(|a| increasing(sc.m(), out.q).into_iter().map(move |b| (a.clone(), b)))
                .collect();
            let components = keys
                .into_iter()
                .map(|(a, b)| {
                    let e = out.coeff(&a, &b);
                    Ok(FormComponent { index: form_key(&a, &b), expression: printable(&e), value: c(eval(&e, &p)?) })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            print_json(&FormValue {
                scenario: sc.inputs.id.clone(),
                kind: kind.name().into(),
                input,
                point: at,
                p: out.p,
                q: out.q,
                components,
            })?;
        }
    }
    Ok(Outcome::Pass)
}

fn cmd_check(path: PathBuf, suite: SuiteArg, sampling: Sampling, quad: Quadrature) -> Result<Outcome, CliError> {
    let sc = scenario::load(&path)?;
    let opts = options(Some(&sampling), Some(&quad))?;
    let suites: Vec<Suite> = match suite {
        SuiteArg::All => Suite::ALL.to_vec(),
        SuiteArg::Algebroid => vec![Suite::Algebroid],
        SuiteArg::Connection => vec![Suite::Connection],
        SuiteArg::Laplace => vec![Suite::Laplace],
        SuiteArg::Forms => vec![Suite::Forms],
        SuiteArg::Integrals => vec![Suite::Integrals],
    };
    let report = CheckReport::new(&sc.inputs.id, &run_check(&sc.inputs, &suites, &opts)?, opts.seed);
    print_json(&report)?;
    Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
}

fn cmd_integrate(path: PathBuf, field: String, quad: Quadrature) -> Result<Outcome, CliError> {
    let sc = scenario::load(&path)?;
    let opts = options(None, Some(&quad))?;
    let z = sc.section(&field)?;
    if !z.is_horizontal() {
        return Err(CliError::Usage(format!("section '{field}' must be purely horizontal")));
    }
    let cd = connection(&sc)?;
    let dom: IntegrationDomain = opts.domain(sc.n(), sc.m())?;
    let (i1, i1c, i2) = identity_values(z, &cd, &dom)?;
    let kahler = is_kahler(&cd, opts.samples, opts.seed, opts.tol)?;
    let kahler_integral = kahler.then_some(c(i2));
    let tol = opts.int_tol;
    let pass = i1.norm() <= tol && i1c.norm() <= tol && (!kahler || i2.norm() <= tol);
    let tolerance_note = format!(
        "midpoint rule on {}^{} cells over [{}, {}]; absolute tolerance {tol:e} on each integral; \
         `check --suite integrals` also tests edge decay and grid refinement",
        opts.grid,
        2 * (sc.n() + sc.m()),
        opts.box_lo,
        opts.box_hi
    );
    print_json(&IntegralReport {
        scenario: sc.inputs.id.clone(),
        field,
        box_bounds: [opts.box_lo, opts.box_hi],
        grid: opts.grid,
        integral: c(i1),
        conjugate_integral: c(i1c),
        kahler_integral,
        tolerance: tol,
        pass,
        tolerance_note,
    })?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Validate { scenario, sampling } => cmd_validate(scenario, sampling),
        Command::Tensors { scenario, at } => cmd_tensors(scenario, at),
        Command::Laplacian { scenario, function, form, kind, at } => cmd_laplacian(scenario, function, form, kind, at),
        Command::Check { scenario, suite, sampling, quadrature } => cmd_check(scenario, suite, sampling, quadrature),
        Command::Integrate { scenario, field, quadrature } => cmd_integrate(scenario, field, quadrature),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

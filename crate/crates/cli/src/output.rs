//! JSON shapes written to stdout. Complex numbers are `[re, im]`.

use num_complex::Complex64;
use serde::Serialize;

use finsler_algebroid::report::{CheckResult, Status};
use finsler_algebroid::suite::SuiteResults;

pub type C = [f64; 2];

pub fn c(z: Complex64) -> C {
    [z.re, z.im]
}

#[derive(Serialize)]
pub struct Entry {
    pub suite: String,
    pub identity: String,
    /// `null` for skipped entries.
    pub max_residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
    /// `pass`, `fail` or `skipped: <reason>`.
    pub status: String,
}

impl Entry {
    fn new(suite: &str, c: &CheckResult, seed: u64) -> Self {
        let (status, measured) = match &c.status {
            Status::Pass => ("pass".to_string(), true),
            Status::Fail => ("fail".to_string(), true),
            Status::Skipped(why) => (format!("skipped: {why}"), false),
        };
        Entry {
            suite: suite.to_string(),
            identity: c.name.clone(),
            max_residual: measured.then_some(c.max_residual),
            tolerance: measured.then_some(c.tolerance),
            samples: c.samples,
            seed,
            pass: !c.failed(),
            status,
        }
    }
}

#[derive(Serialize)]
pub struct CheckReport {
    pub scenario: String,
    pub pass: bool,
    pub entries: Vec<Entry>,
    /// Alternative readings; never affect `pass`.
    pub diagnostics: Vec<Entry>,
}

impl CheckReport {
    pub fn new(scenario: &str, results: &SuiteResults, seed: u64) -> Self {
        let mut entries = Vec::new();
        let mut diagnostics = Vec::new();
        for (suite, rep) in results {
            entries.extend(rep.checks.iter().map(|c| Entry::new(suite, c, seed)));
            diagnostics.extend(rep.diagnostics.iter().map(|c| Entry::new(suite, c, seed)));
        }
        let pass = entries.iter().all(|e| e.pass);
        CheckReport { scenario: scenario.to_string(), pass, entries, diagnostics }
    }
}

#[derive(Serialize)]
pub struct Traces {
    /// `L_α = L^β_{αβ} − L^β_{βα}`.
    #[serde(rename = "L")]
    pub l: Vec<C>,
    /// `C_α = C^β_{αβ}`.
    #[serde(rename = "C")]
    pub c: Vec<C>,
    /// `𝒞_α = 𝒞^β_{αβ}`.
    pub structure: Vec<C>,
}

/// Index conventions: `N[a][b] = N^b_a`, `L[g][a][b] = L^g_{ab}` (same for
/// `C` and `R`), `h_inv[s][b] = h^{s̄b}`; all 0-based in the arrays.
#[derive(Serialize)]
pub struct Tensors {
    pub scenario: String,
    pub point: String,
    pub h: Vec<Vec<C>>,
    pub h_inv: Vec<Vec<C>>,
    pub det: C,
    #[serde(rename = "N")]
    pub n: Vec<Vec<C>>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<Vec<C>>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<Vec<C>>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<Vec<C>>>,
    pub traces: Traces,
}

#[derive(Serialize)]
pub struct ScalarValue {
    pub scenario: String,
    pub kind: String,
    pub input: String,
    pub point: String,
    /// The resulting expression, or `null` when it is too large to print.
    pub expression: Option<String>,
    pub expression_nodes: usize,
    pub value: C,
}

#[derive(Serialize)]
pub struct FormComponent {
    /// `"a1,a2|b1"`, 1-based.
    pub index: String,
    pub expression: Option<String>,
    pub value: C,
}

#[derive(Serialize)]
pub struct FormValue {
    pub scenario: String,
    pub kind: String,
    pub input: String,
    pub point: String,
    pub p: usize,
    pub q: usize,
    pub components: Vec<FormComponent>,
}

#[derive(Serialize)]
pub struct IntegralReport {
    pub scenario: String,
    pub field: String,
    pub box_bounds: [f64; 2],
    pub grid: usize,
    pub integral: C,
    pub conjugate_integral: C,
    /// Present when the scenario is Kähler.
    pub kahler_integral: Option<C>,
    pub tolerance: f64,
    pub pass: bool,
    pub tolerance_note: String,
}

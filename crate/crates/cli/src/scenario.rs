//! Scenario files: JSON describing an algebroid, a Finsler function and
//! named inputs. Frame, coordinate and form indices in the file are 1-based.

use std::collections::BTreeMap;
use std::fmt;
use std::marker::PhantomData;
use std::path::Path;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;

use finsler_algebroid::algebroid::AlgebroidSpec;
use finsler_algebroid::calculus::SectionField;
use finsler_algebroid::expr::{parse_expr, ComplexExpr};
use finsler_algebroid::forms::HorizontalForm;
use finsler_algebroid::suite::Inputs;

use crate::CliError;

/// A JSON object whose keys must be unique.
#[derive(Debug)]
pub struct UniqueMap<T>(pub BTreeMap<String, T>);

impl<T> Default for UniqueMap<T> {
    fn default() -> Self {
        UniqueMap(BTreeMap::new())
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for UniqueMap<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V<T>(PhantomData<T>);
        impl<'de, T: Deserialize<'de>> Visitor<'de> for V<T> {
            type Value = UniqueMap<T>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object with unique keys")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((k, v)) = access.next_entry::<String, T>()? {
                    if out.contains_key(&k) {
                        return Err(serde::de::Error::custom(format!("duplicate name '{k}'")));
                    }
                    out.insert(k, v);
                }
                Ok(UniqueMap(out))
            }
        }
        d.deserialize_map(V(PhantomData))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureEntry {
    pub gamma: usize,
    pub alpha: usize,
    pub beta: usize,
    pub expr: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    #[serde(default)]
    pub zh: Vec<String>,
    #[serde(default)]
    pub zv: Vec<String>,
    #[serde(default)]
    pub zhbar: Vec<String>,
    #[serde(default)]
    pub zvbar: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub p: usize,
    pub q: usize,
    /// `"a1,a2|b1"` → coefficient expression.
    pub coeffs: UniqueMap<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Defaults to the file stem.
    #[serde(default)]
    pub id: Option<String>,
    pub n: usize,
    pub m: usize,
    /// `anchor[α][k] = ρᵏ_α`.
    pub anchor: Vec<Vec<String>>,
    #[serde(default)]
    pub structure: Vec<StructureEntry>,
    pub finsler: String,
    #[serde(default)]
    pub named_functions: UniqueMap<String>,
    #[serde(default)]
    pub named_sections: UniqueMap<SectionSpec>,
    #[serde(default)]
    pub named_forms: UniqueMap<FormSpec>,
}

/// A loaded scenario with every expression parsed.
pub struct Scenario {
    pub inputs: Inputs,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.inputs.spec.n()
    }

    pub fn m(&self) -> usize {
        self.inputs.spec.m()
    }

    pub fn expr(&self, field: &str, text: &str) -> Result<ComplexExpr, CliError> {
        expr(field, text, self.n(), self.m())
    }

    pub fn section(&self, name: &str) -> Result<&SectionField, CliError> {
        self.inputs
            .sections
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, s)| s)
            .ok_or_else(|| CliError::Usage(format!("no section named '{name}' in scenario")))
    }

    pub fn form(&self, name: &str) -> Result<&HorizontalForm, CliError> {
        self.inputs
            .forms
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, s)| s)
            .ok_or_else(|| CliError::Usage(format!("no form named '{name}' in scenario")))
    }
}

fn expr(field: &str, text: &str, n: usize, m: usize) -> Result<ComplexExpr, CliError> {
    parse_expr(text, n, m).map_err(|source| CliError::Expr { field: field.to_string(), source })
}

fn invalid(msg: String) -> CliError {
    CliError::Scenario(msg)
}

/// `"1,2|1"` → `([0, 1], [0])`.
pub fn parse_form_key(key: &str, m: usize) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    let (a, b) = key.split_once('|').ok_or_else(|| invalid(format!("form key '{key}' needs a '|'")))?;
    let side = |s: &str| -> Result<Vec<usize>, CliError> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| match t.parse::<usize>() {
                Ok(i) if (1..=m).contains(&i) => Ok(i - 1),
                _ => Err(invalid(format!("form key '{key}': index '{t}' is not in 1..{m}"))),
            })
            .collect()
    };
    Ok((side(a)?, side(b)?))
}

pub fn from_file(file: ScenarioFile, default_id: &str) -> Result<Scenario, CliError> {
    let (n, m) = (file.n, file.m);
    if n == 0 || m == 0 {
        return Err(invalid(format!("n and m must be positive, got n = {n}, m = {m}")));
    }
    if file.anchor.len() != m || file.anchor.iter().any(|row| row.len() != n) {
        return Err(invalid(format!("anchor must be an array of {m} rows of {n} expressions")));
    }
    let anchor = file
        .anchor
        .iter()
        .enumerate()
        .map(|(a, row)| {
            row.iter().enumerate().map(|(k, t)| expr(&format!("anchor[{}][{}]", a + 1, k + 1), t, n, m)).collect()
        })
        .collect::<Result<Vec<Vec<_>>, _>>()?;
    let mut structure = Vec::new();
    for (i, s) in file.structure.iter().enumerate() {
        if [s.gamma, s.alpha, s.beta].iter().any(|&x| x == 0 || x > m) {
            return Err(invalid(format!("structure[{}]: indices must lie in 1..{m}", i + 1)));
        }
        structure
            .push(((s.gamma - 1, s.alpha - 1, s.beta - 1), expr(&format!("structure[{}]", i + 1), &s.expr, n, m)?));
    }
    let spec = AlgebroidSpec::new(n, m, anchor, structure)?;
    let f = expr("finsler", &file.finsler, n, m)?;
    let functions = file
        .named_functions
        .0
        .iter()
        .map(|(k, t)| Ok((k.clone(), expr(&format!("named_functions.{k}"), t, n, m)?)))
        .collect::<Result<_, CliError>>()?;
    let mut sections = Vec::new();
    for (name, s) in &file.named_sections.0 {
        let block = |label: &str, v: &[String]| -> Result<Vec<ComplexExpr>, CliError> {
            if v.is_empty() {
                return Ok(vec![ComplexExpr::zero(); m]);
            }
            if v.len() != m {
                return Err(invalid(format!("named_sections.{name}.{label} needs {m} components, got {}", v.len())));
            }
            v.iter().map(|t| expr(&format!("named_sections.{name}.{label}"), t, n, m)).collect()
        };
        let section = SectionField {
            zh: block("zh", &s.zh)?,
            zv: block("zv", &s.zv)?,
            zhbar: block("zhbar", &s.zhbar)?,
            zvbar: block("zvbar", &s.zvbar)?,
        };
        sections.push((name.clone(), section));
    }
    let mut forms = Vec::new();
    for (name, fs) in &file.named_forms.0 {
        let mut form = HorizontalForm::zero(m, fs.p, fs.q)?;
        for (key, text) in &fs.coeffs.0 {
            let (a, b) = parse_form_key(key, m)?;
            let e = expr(&format!("named_forms.{name}.coeffs[\"{key}\"]"), text, n, m)?;
            form.set(a, b, e).map_err(|e| invalid(format!("named_forms.{name}: {e}")))?;
        }
        forms.push((name.clone(), form));
    }
    Ok(Scenario {
        inputs: Inputs { id: file.id.unwrap_or_else(|| default_id.to_string()), spec, f, functions, sections, forms },
    })
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    let file: ScenarioFile =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.display().to_string(), source })?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    from_file(file, &stem)
}

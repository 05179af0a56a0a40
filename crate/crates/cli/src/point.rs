//! `--at` points and `--box` intervals.

use std::str::FromStr;

use num_complex::Complex64;

use finsler_algebroid::expr::EvalPoint;

use crate::CliError;

/// Parses `z1=a+bi,...,u1=c+di,...`; every coordinate must appear once.
pub fn parse_point(text: &str, n: usize, m: usize) -> Result<EvalPoint, CliError> {
    let mut z = vec![None; n];
    let mut u = vec![None; m];
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("point entry '{item}' must look like z1=1+2i")))?;
        let name = name.trim();
        let slot = match (name.chars().next(), name.get(1..).and_then(|k| k.parse::<usize>().ok())) {
            (Some('z'), Some(k)) if (1..=n).contains(&k) => &mut z[k - 1],
            (Some('u'), Some(a)) if (1..=m).contains(&a) => &mut u[a - 1],
            _ => return Err(CliError::Usage(format!("unknown coordinate '{name}' (expected z1..z{n}, u1..u{m})"))),
        };
        if slot.is_some() {
            return Err(CliError::Usage(format!("coordinate '{name}' given twice")));
        }
        let v = Complex64::from_str(&value.replace(' ', ""))
            .map_err(|_| CliError::Usage(format!("'{value}' is not a complex number (e.g. 1.5-2i)")))?;
        *slot = Some(v);
    }
    let collect = |v: Vec<Option<Complex64>>, c: char| -> Result<Vec<Complex64>, CliError> {
        v.into_iter()
            .enumerate()
            .map(|(i, x)| x.ok_or_else(|| CliError::Usage(format!("point is missing {c}{}", i + 1))))
            .collect()
    };
    Ok(EvalPoint::new(collect(z, 'z')?, collect(u, 'u')?))
}

/// Parses `lo..hi` (or `lo,hi`).
pub fn parse_interval(text: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = text
        .split_once("..")
        .or_else(|| text.split_once(','))
        .ok_or_else(|| CliError::Usage(format!("box '{text}' must look like -4..4")))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("'{s}' is not a number")));
    let (lo, hi) = (num(a)?, num(b)?);
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(CliError::Usage(format!("box '{text}' must have finite lo < hi")));
    }
    Ok((lo, hi))
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::harness::ScenarioResult;
use super::scoring::Truth;
use super::Family;
use crate::baselines::MethodKind;
use crate::error::{Error, Result};
use crate::rvm::{EndpointStatus, Side};

pub const RUNS_HEADER: &str = "method,family,N,replicate,param,side,endpoint,truth,success,status,n_evals,error";
pub const REPORT_HEADER: &str = "method,family,N,success_rate,mean_error,mean_error_sub10,frac_error_gt10,mean_evals";

fn truth_field(truth: Option<Truth>, side: Side) -> String {
    match truth {
        None => String::new(),
        Some(Truth::Finite(v)) => v.to_string(),
        Some(Truth::Unbounded) => (side.sign() * f64::INFINITY).to_string(),
    }
}

/// Inverse of the `truth` column encoding: empty for no truth, ±inf for an
/// unbounded one.
pub fn parse_truth(field: &str) -> std::result::Result<Option<Truth>, String> {
    if field.is_empty() {
        return Ok(None);
    }
    let v: f64 = field.parse().map_err(|_| format!("bad truth `{field}`"))?;
    Ok(Some(if v.is_infinite() { Truth::Unbounded } else { Truth::Finite(v) }))
}

pub fn write_runs(rows: &[ScenarioResult]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RUNS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.family,
            r.n,
            r.replicate,
            r.param,
            r.side,
            r.endpoint,
            truth_field(r.truth, r.side),
            r.success,
            r.status,
            r.n_evals,
            r.error
        )
        .unwrap();
    }
    out
}

fn parse_row(line: &str) -> std::result::Result<ScenarioResult, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 12 {
        return Err(format!("expected 12 fields, found {}", f.len()));
    }
    fn num<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("bad {what} `{s}`"))
    }
    Ok(ScenarioResult {
        method: f[0].parse().map_err(|e: Error| e.to_string())?,
        family: f[1].parse().map_err(|e: Error| e.to_string())?,
        n: num(f[2], "N")?,
        replicate: num(f[3], "replicate")?,
        param: num(f[4], "param")?,
        side: f[5].parse().map_err(|_| format!("bad side `{}`", f[5]))?,
        endpoint: num(f[6], "endpoint")?,
        truth: parse_truth(f[7])?,
        success: num(f[8], "success")?,
        status: f[9].parse().map_err(|_| format!("bad status `{}`", f[9]))?,
        n_evals: num(f[10], "n_evals")?,
        error: num(f[11], "error")?,
    })
}

/// Parse a run file. The header must match [`RUNS_HEADER`]; errors carry
/// the 1-based line number.
pub fn parse_runs(text: &str) -> Result<Vec<ScenarioResult>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == RUNS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{RUNS_HEADER}`"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_row(l.trim_end()).map_err(|message| Error::Parse { line: i + 1, message })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: MethodKind,
    pub family: Family,
    pub n: usize,
    pub success_rate: f64,
    /// Over runs that reported convergence; `None` if there were none.
    pub mean_error: Option<f64>,
    pub mean_error_sub10: Option<f64>,
    pub frac_error_gt10: Option<f64>,
    /// Over successful runs only.
    pub mean_evals: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// Group by (family, N, method). Bounds without a truth are skipped.
pub fn aggregate(rows: &[ScenarioResult]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(Family, usize, MethodKind), Vec<&ScenarioResult>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.truth.is_some()) {
        groups.entry((r.family, r.n, r.method)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((family, n, method), g)| {
            let successes = g.iter().filter(|r| r.success).count();
            let errors: Vec<f64> = g
                .iter()
                .filter(|r| r.status == EndpointStatus::Converged && r.error.is_finite())
                .map(|r| r.error)
                .collect();
            let frac = (!errors.is_empty())
                .then(|| errors.iter().filter(|&&e| e > 10.0).count() as f64 / errors.len() as f64);
            ReportRow {
                method,
                family,
                n,
                success_rate: successes as f64 / g.len() as f64,
                mean_error: mean(errors.iter().copied()),
                mean_error_sub10: mean(errors.iter().copied().filter(|&e| e < 10.0)),
                frac_error_gt10: frac,
                mean_evals: mean(g.iter().filter(|r| r.success).map(|r| r.n_evals as f64)),
            }
        })
        .collect()
}

pub fn write_report(rows: &[ReportRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.family,
            r.n,
            r.success_rate,
            opt(r.mean_error),
            opt(r.mean_error_sub10),
            opt(r.frac_error_gt10),
            opt(r.mean_evals)
        )
        .unwrap();
    }
    out
}

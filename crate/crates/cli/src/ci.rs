use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use nalgebra::{DMatrix, DVector};
use plci::baselines::{fit_mle, run_method, MethodKind};
use plci::benchmark::{simulate, BenchmarkSpec, Dataset, Family, LogisticModel};
use plci::model::{GaussianLogLikelihood, LogLikelihood};
use plci::rvm::{EndpointResult, Side};
use serde::Serialize;
use serde_json::Value;

use crate::{resolve, write_file, CiArgs, CliError};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Demo {
    /// Standard normal log-likelihood in two dimensions.
    Quadratic,
    /// −½θ1², so θ0 is inestimable.
    Flat,
}

struct FlatDemo;

impl LogLikelihood for FlatDemo {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, t: &[f64]) -> f64 {
        -0.5 * t[1] * t[1]
    }
    fn gradient(&self, t: &[f64]) -> Option<DVector<f64>> {
        Some(DVector::from_vec(vec![0.0, -t[1]]))
    }
    fn hessian(&self, _: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]))
    }
}

/// One JSON-lines record. Non-finite numbers are written as strings.
#[derive(Serialize)]
struct Record {
    method: MethodKind,
    param: usize,
    name: String,
    estimate: Value,
    lower: Value,
    upper: Value,
    lower_status: String,
    upper_status: String,
    evals: u64,
}

fn number(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

/// `[a, b]` with open ends at infinite bounds, six decimals.
pub fn format_interval(lower: f64, upper: f64) -> String {
    let end = |x: f64| {
        if x.is_finite() {
            format!("{x:.6}")
        } else if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    };
    let open = if lower.is_finite() { '[' } else { '(' };
    let close = if upper.is_finite() { ']' } else { ')' };
    format!("{open}{}, {}{close}", end(lower), end(upper))
}

/// Parse a data set CSV (`x,c1,...,ck`).
fn read_dataset(path: &Path, family: Family) -> Result<Dataset, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Failure(format!("cannot read {}: {e}", path.display())))?;
    let bad = |line: usize, msg: String| CliError::Usage(format!("{}: line {line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate();
    let k = family.covariates();
    let expected: Vec<String> = std::iter::once("x".to_string()).chain((1..=k).map(|j| format!("c{j}"))).collect();
    match lines.next() {
        Some((_, header)) if header.trim().split(',').map(str::trim).eq(expected.iter().map(String::as_str)) => {}
        _ => return Err(bad(1, format!("expected header `{}`", expected.join(",")))),
    }
    let mut responses = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k + 1 {
            return Err(bad(i + 1, format!("expected {} fields, found {}", k + 1, fields.len())));
        }
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.trim().parse::<f64>()).collect();
        let row = parsed.map_err(|e| bad(i + 1, e.to_string()))?;
        if row[0] != 0.0 && row[0] != 1.0 {
            return Err(bad(i + 1, "response must be 0 or 1".into()));
        }
        responses.push(row[0]);
        values.extend_from_slice(&row[1..]);
    }
    if responses.is_empty() {
        return Err(bad(2, "no data rows".into()));
    }
    Ok(Dataset {
        covariates: DMatrix::from_row_slice(responses.len(), k, &values),
        responses,
    })
}

pub fn run(args: CiArgs) -> Result<(), CliError> {
    let mut r = resolve(&args.common, &[MethodKind::Rvm])?;
    r.settings.rvm.trace = args.trace || r.file.trace.unwrap_or(false);

    let data;
    let logistic;
    let (model, theta_hat, family): (&dyn LogLikelihood, Vec<f64>, Option<Family>) = match args.demo {
        Some(Demo::Quadratic) => (&GaussianLogLikelihood::standard(2) as &dyn LogLikelihood, vec![0.0; 2], None),
        Some(Demo::Flat) => (&FlatDemo, vec![0.0; 2], None),
        None => {
            let family = r.family;
            data = match &args.data {
                Some(path) => read_dataset(path, family)?,
                None => {
                    let n = args.n.or_else(|| r.file.n.clone().and_then(|n| n.into_vec().first().copied()));
                    let spec = BenchmarkSpec {
                        n: n.unwrap_or(1000),
                        ..r.spec
                    };
                    simulate(&spec, args.replicate)?
                }
            };
            if let Some(path) = &args.dump_data {
                write_file(path, &data.to_csv())?;
            }
            logistic = LogisticModel::for_family(&data, family);
            let start = family.truth().theta(family);
            let fit = fit_mle(&logistic, &start, &r.settings.baseline.optimizer, &r.settings.rvm.diff)?;
            if !fit.converged {
                return Err(CliError::Failure(format!(
                    "maximum likelihood fit did not converge (|g| = {:.3e})",
                    fit.gradient_norm
                )));
            }
            (&logistic as &dyn LogLikelihood, fit.theta.as_slice().to_vec(), Some(family))
        }
    };

    let dim = model.dim();
    let params = r.params.clone().unwrap_or_else(|| (0..dim).collect());
    if let Some(&bad) = params.iter().find(|&&p| p >= dim) {
        return Err(CliError::Usage(format!("parameter index {bad} out of range 0..{dim}")));
    }
    let scale = |p: usize, x: f64| family.map_or(x, |f| f.natural_scale(p, x));
    let name = |p: usize| family.map_or_else(|| format!("theta{p}"), |f| f.parameter_name(p));

    let mut jsonl = String::new();
    for &p in &params {
        for &method in &r.methods {
            let lower = run_method(method, model, &theta_hat, p, Side::Lower, &r.settings)?;
            let upper = run_method(method, model, &theta_hat, p, Side::Upper, &r.settings)?;
            for (side, res) in [(Side::Lower, &lower), (Side::Upper, &upper)] {
                trace(method, &name(p), side, res);
            }
            let (lo, hi) = (scale(p, lower.endpoint), scale(p, upper.endpoint));
            let evals = lower.evals.total() + upper.evals.total();
            println!(
                "{method} {}: {} {}/{} evals {evals}",
                name(p),
                format_interval(lo, hi),
                lower.status,
                upper.status
            );
            let record = Record {
                method,
                param: p,
                name: name(p),
                estimate: number(scale(p, theta_hat[p])),
                lower: number(lo),
                upper: number(hi),
                lower_status: lower.status.to_string(),
                upper_status: upper.status.to_string(),
                evals,
            };
            let line = serde_json::to_string(&record).map_err(|e| CliError::Failure(e.to_string()))?;
            writeln!(jsonl, "{line}").expect("writing to a string");
        }
    }
    match &args.out {
        Some(path) => write_file(path, &jsonl)?,
        None => print!("{jsonl}"),
    }
    Ok(())
}

fn trace(method: MethodKind, name: &str, side: Side, res: &EndpointResult) {
    for t in &res.trace {
        eprintln!("{method} {name} {side} {t}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intervals_open_at_infinite_ends() {
        assert_eq!(format_interval(-1.959963984540054, 1.959963984540054), "[-1.959964, 1.959964]");
        assert_eq!(format_interval(f64::NEG_INFINITY, f64::INFINITY), "(-inf, inf)");
        assert_eq!(format_interval(0.5, f64::INFINITY), "[0.500000, inf)");
    }

    #[test]
    fn json_numbers() {
        assert_eq!(number(f64::INFINITY), Value::from("inf"));
        assert_eq!(number(-2.5), Value::from(-2.5));
    }
}

use serde::{Deserialize, Serialize};

use super::scoring::{consensus_truth, score_run, Truth, ADMISSIBLE_SLACK};
use super::{simulate, BenchmarkSpec, Family, LogisticModel};
use crate::baselines::{fit_mle, run_method, MethodKind, MethodSettings};
use crate::error::{Error, Result};
use crate::model::LogLikelihood;
use crate::rvm::{EndpointStatus, Side};
use crate::stats::likelihood_threshold;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    /// Family, seed and covariate distribution; `n` is taken from `sizes`.
    pub spec: BenchmarkSpec,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<MethodKind>,
    /// Parameter indices to bound; all when `None`.
    pub parameters: Option<Vec<usize>>,
    pub settings: MethodSettings,
    /// Worker threads. `Some(1)` runs sequentially; `None` uses all cores.
    pub jobs: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            spec: BenchmarkSpec::default(),
            sizes: vec![1000],
            replicates: 50,
            methods: MethodKind::ALL.to_vec(),
            parameters: None,
            settings: MethodSettings::default(),
            jobs: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.settings.rvm.validate()?;
        self.settings.baseline.validate()?;
        if self.replicates == 0 || self.methods.is_empty() || self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::Config("need at least one replicate, method and data set size".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        let dim = self.spec.family.dim();
        if let Some(p) = &self.parameters {
            if p.is_empty() || p.iter().any(|&i| i >= dim) {
                return Err(Error::Config(format!("parameter indices must lie in 0..{dim}")));
            }
        }
        Ok(())
    }

    fn parameter_indices(&self) -> Vec<usize> {
        self.parameters
            .clone()
            .unwrap_or_else(|| (0..self.spec.family.dim()).collect())
    }
}

/// One method's result for one bound of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub method: MethodKind,
    pub family: Family,
    pub n: usize,
    pub replicate: u64,
    pub param: usize,
    pub side: Side,
    /// On the scoring scale (α rather than α′ for powers).
    pub endpoint: f64,
    /// Consensus truth on the scoring scale; `None` if no method found an
    /// admissible point.
    pub truth: Option<Truth>,
    pub success: bool,
    pub status: EndpointStatus,
    pub n_evals: u64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: u64,
    pub n: usize,
    /// False when the MLE fit did not converge; no rows are produced then.
    pub mle_converged: bool,
    pub rows: Vec<ScenarioResult>,
}

/// Simulate replicate `rep` at size `n`, fit the MLE and run every method
/// on every requested bound.
pub fn run_replicate(cfg: &BenchmarkConfig, n: usize, rep: u64) -> Result<ReplicateOutcome> {
    let spec = BenchmarkSpec { n, ..cfg.spec };
    let family = spec.family;
    let data = simulate(&spec, rep)?;
    let model = LogisticModel::for_family(&data, family);
    let start = family.truth().theta(family);
    let rvm = &cfg.settings.rvm;
    let fit = fit_mle(&model, &start, &cfg.settings.baseline.optimizer, &rvm.diff)?;
    let mut outcome = ReplicateOutcome {
        replicate: rep,
        n,
        mle_converged: fit.converged,
        rows: Vec::new(),
    };
    if !fit.converged {
        return Ok(outcome);
    }
    let theta_hat = fit.theta.as_slice();
    let target = likelihood_threshold(fit.value, rvm.confidence)?;

    for param in cfg.parameter_indices() {
        for side in [Side::Lower, Side::Upper] {
            let mut results = Vec::with_capacity(cfg.methods.len());
            for &method in &cfg.methods {
                results.push((method, run_method(method, &model, theta_hat, param, side, &cfg.settings)?));
            }
            let admissible: Vec<f64> = results
                .iter()
                .filter(|(_, r)| !r.endpoint.is_nan() && r.theta.iter().all(|v| v.is_finite()))
                .filter(|(_, r)| model.value(r.theta.as_slice()) >= target - ADMISSIBLE_SLACK)
                .map(|(_, r)| r.theta[param])
                .collect();
            let center = theta_hat[param];
            let truth = consensus_truth(side, center, &admissible);
            for (method, r) in results {
                let endpoint = family.natural_scale(param, r.endpoint);
                let (truth_out, success, error) = match truth {
                    None => (None, false, f64::NAN),
                    Some(t) => {
                        let t_natural = match t {
                            Truth::Finite(v) => Truth::Finite(family.natural_scale(param, v)),
                            Truth::Unbounded => Truth::Unbounded,
                        };
                        let s = score_run(r.status, side, center, r.endpoint, endpoint, t_natural);
                        (Some(t_natural), s.success, s.error)
                    }
                };
                outcome.rows.push(ScenarioResult {
                    method,
                    family,
                    n,
                    replicate: rep,
                    param,
                    side,
                    endpoint,
                    truth: truth_out,
                    success,
                    status: r.status,
                    n_evals: r.evals.total(),
                    error,
                });
            }
        }
    }
    Ok(outcome)
}

/// Every replicate at every size. Rows come back sorted by
/// (N, replicate, parameter, side, method) whatever the thread count.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<ReplicateOutcome>> {
    cfg.validate()?;
    let jobs: Vec<(usize, u64)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| (0..cfg.replicates as u64).map(move |r| (n, r)))
        .collect();
    let mut out = execute(cfg, &jobs)?;
    out.sort_by_key(|o| (o.n, o.replicate));
    for o in &mut out {
        o.rows.sort_by_key(|r| (r.param, r.side, r.method));
    }
    Ok(out)
}

#[cfg(feature = "parallel")]
fn execute(cfg: &BenchmarkConfig, jobs: &[(usize, u64)]) -> Result<Vec<ReplicateOutcome>> {
    use rayon::prelude::*;
    if cfg.jobs == Some(1) {
        return execute_sequential(cfg, jobs);
    }
    let run = || jobs.par_iter().map(|&(n, r)| run_replicate(cfg, n, r)).collect();
    match cfg.jobs {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run),
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn execute(cfg: &BenchmarkConfig, jobs: &[(usize, u64)]) -> Result<Vec<ReplicateOutcome>> {
    execute_sequential(cfg, jobs)
}

fn execute_sequential(cfg: &BenchmarkConfig, jobs: &[(usize, u64)]) -> Result<Vec<ReplicateOutcome>> {
    jobs.iter().map(|&(n, r)| run_replicate(cfg, n, r)).collect()
}

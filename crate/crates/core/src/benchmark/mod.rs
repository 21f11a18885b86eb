//! Simulated logistic-regression benchmark with count covariates raised to
//! unknown powers.
//!
//! Parameters are ordered θ = (α′₁..α′ₖ, β₀, β₁..βₖ) with α = softplus(α′).
//! The GLM family fixes every α at 1 and has θ = (β₀..βₖ).

mod harness;
mod likelihood;
mod report;
mod scoring;
mod simulate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use harness::{run_benchmark, run_replicate, BenchmarkConfig, ReplicateOutcome, ScenarioResult};
pub use likelihood::LogisticModel;
pub use report::{aggregate, parse_runs, parse_truth, write_report, write_runs, ReportRow, REPORT_HEADER, RUNS_HEADER};
pub use scoring::{consensus_truth, score_run, Score, Truth, ADMISSIBLE_SLACK, UNBOUNDED_LIMIT};
pub use simulate::{replicate_seed, simulate, simulate_covariates, simulate_responses, splitmix64, Dataset};

use crate::error::{Error, Result};
use crate::stats::{softplus, softplus_inverse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// One transformed covariate, 3 parameters.
    Transformed3,
    /// Five transformed covariates, 11 parameters.
    Transformed11,
    /// Ten covariates with powers fixed at 1, 11 parameters.
    Glm11,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Transformed3, Family::Transformed11, Family::Glm11];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Transformed3 => "transformed3",
            Family::Transformed11 => "transformed11",
            Family::Glm11 => "glm11",
        }
    }

    pub fn covariates(self) -> usize {
        match self {
            Family::Transformed3 => 1,
            Family::Transformed11 => 5,
            Family::Glm11 => 10,
        }
    }

    pub fn free_powers(self) -> bool {
        !matches!(self, Family::Glm11)
    }

    pub fn dim(self) -> usize {
        let k = self.covariates();
        if self.free_powers() {
            2 * k + 1
        } else {
            k + 1
        }
    }

    pub fn truth(self) -> TrueParameters {
        match self {
            Family::Transformed3 => TrueParameters {
                alpha: vec![0.5],
                beta: vec![-10.0, 5.0],
            },
            Family::Transformed11 => TrueParameters {
                alpha: vec![0.2, 1.0, 0.1, 0.2, 0.5],
                beta: vec![-1.0, 5.0, 2.0, -1.0, -3.0, -2.0],
            },
            Family::Glm11 => TrueParameters {
                alpha: vec![1.0; 10],
                beta: vec![0.8, 0.2, -0.6, -1.0, -1.0, 0.2, 0.5, 0.1, -0.2, 0.2, 2.0],
            },
        }
    }

    /// Whether coordinate `index` of θ is a transformed power α′.
    pub fn is_power(self, index: usize) -> bool {
        self.free_powers() && index < self.covariates()
    }

    /// Value of coordinate `index` on the scale used for scoring: α for the
    /// transformed powers, unchanged otherwise.
    pub fn natural_scale(self, index: usize, value: f64) -> f64 {
        if self.is_power(index) {
            if value == f64::INFINITY {
                f64::INFINITY
            } else if value == f64::NEG_INFINITY {
                0.0
            } else {
                softplus(value)
            }
        } else {
            value
        }
    }

    pub fn parameter_name(self, index: usize) -> String {
        let k = self.covariates();
        if self.is_power(index) {
            format!("alpha{}", index + 1)
        } else if self.free_powers() {
            format!("beta{}", index - k)
        } else {
            format!("beta{index}")
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown family `{s}`")))
    }
}

/// Covariate powers α (natural scale) and coefficients β, β₀ first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueParameters {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl TrueParameters {
    /// θ on the optimization scale for the given family.
    pub fn theta(&self, family: Family) -> Vec<f64> {
        let mut t = Vec::with_capacity(family.dim());
        if family.free_powers() {
            t.extend(self.alpha.iter().map(|&a| softplus_inverse(a)));
        }
        t.extend_from_slice(&self.beta);
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub family: Family,
    /// Data set size N.
    pub n: usize,
    pub seed: u64,
    pub nb_mean: f64,
    pub nb_var: f64,
    pub binom_p: f64,
    /// Added to every count so that 0^0 = 1.
    pub zero_perturbation: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            family: Family::Transformed3,
            n: 1000,
            seed: 0,
            nb_mean: 5.0,
            nb_var: 10.0,
            binom_p: 0.2,
            zero_perturbation: 1e-6,
        }
    }
}

impl BenchmarkSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        Self {
            family,
            n,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.n >= 1
            && self.nb_mean > 0.0
            && self.nb_var > self.nb_mean
            && self.binom_p > 0.0
            && self.binom_p < 1.0
            && self.zero_perturbation > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid benchmark specification".into()))
        }
    }

    /// Negative binomial (r, p) with mean r(1−p)/p and variance mean/p.
    pub fn negative_binomial(&self) -> (f64, f64) {
        let p = self.nb_mean / self.nb_var;
        (self.nb_mean * p / (1.0 - p), p)
    }
}

//! Comparison methods, the BFGS optimizer they share, and MLE fitting.

mod bfgs;
mod mle;
mod penalty;
mod profile;
mod vm;
mod wald;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use bfgs::{bfgs_minimize, FnMinimand, Minimand, Minimum, OptimizerConfig};
pub use mle::{fit_mle, MleFit};
pub use penalty::squared_penalty_upper;
pub use profile::{binary_search_upper, bisection_upper, grid_search_upper, ProfileEvaluator};
pub use vm::vm_upper;
pub use wald::{wald_ci, wald_endpoint};

use crate::error::{Error, Result};
use crate::model::LogLikelihood;
use crate::rvm::{check_start, find_endpoint, EndpointResult, Oriented, RvmConfig, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Rvm,
    Vm,
    Wald,
    GridSearch,
    Bisection,
    BinarySearch,
    SquaredPenalty,
}

impl MethodKind {
    pub const ALL: [MethodKind; 7] = [
        MethodKind::Rvm,
        MethodKind::Vm,
        MethodKind::Wald,
        MethodKind::GridSearch,
        MethodKind::Bisection,
        MethodKind::BinarySearch,
        MethodKind::SquaredPenalty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Rvm => "rvm",
            MethodKind::Vm => "vm",
            MethodKind::Wald => "wald",
            MethodKind::GridSearch => "grid",
            MethodKind::Bisection => "bisection",
            MethodKind::BinarySearch => "binary",
            MethodKind::SquaredPenalty => "penalty",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "rvm" => MethodKind::Rvm,
            "vm" => MethodKind::Vm,
            "wald" => MethodKind::Wald,
            "grid" | "grid_search" | "gridsearch" => MethodKind::GridSearch,
            "bisection" => MethodKind::Bisection,
            "binary" | "binary_search" | "binarysearch" => MethodKind::BinarySearch,
            "penalty" | "squared_penalty" | "squaredpenalty" => MethodKind::SquaredPenalty,
            other => return Err(Error::Config(format!("unknown method `{other}`"))),
        })
    }
}

/// Settings for the profile-based and penalty methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Inner optimizer for profile evaluations and the penalty objective.
    pub optimizer: OptimizerConfig,
    /// First probe offset for binary search and bisection.
    pub initial_step: f64,
    pub grid_step: f64,
    /// Maximum profile evaluations for grid search before the large probe.
    pub grid_budget: usize,
    /// Offsets beyond this count as an unbounded interval.
    pub unbounded_limit: f64,
    pub penalty_weight: f64,
    /// Largest |ℓ − ℓ*| accepted at the penalty optimum. Unlimited by
    /// default: with a small weight the optimum sits below ℓ* by about
    /// 1/(2w|∂ℓ/∂θ0|).
    pub penalty_tol: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            initial_step: 1.0,
            grid_step: 0.2,
            grid_budget: 200,
            unbounded_limit: 1000.0,
            penalty_weight: 1.0,
            penalty_tol: f64::INFINITY,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        let ok = self.initial_step > 0.0
            && self.grid_step > 0.0
            && self.grid_budget > 0
            && self.unbounded_limit > self.initial_step
            && self.penalty_weight > 0.0
            && self.penalty_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid baseline settings".into()))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodSettings {
    pub rvm: RvmConfig,
    pub baseline: BaselineConfig,
}

/// Run one method for coordinate `index` on the given side.
pub fn run_method(
    kind: MethodKind,
    model: &dyn LogLikelihood,
    theta_hat: &[f64],
    index: usize,
    side: Side,
    settings: &MethodSettings,
) -> Result<EndpointResult> {
    check_start(model, theta_hat)?;
    settings.rvm.validate()?;
    settings.baseline.validate()?;
    let (rvm, base) = (&settings.rvm, &settings.baseline);
    match kind {
        MethodKind::Rvm => return find_endpoint(model, theta_hat, index, side, rvm),
        MethodKind::Wald => {
            if index >= model.dim() {
                return Err(Error::Dimension {
                    expected: model.dim(),
                    got: index + 1,
                });
            }
            return wald_endpoint(model, theta_hat, index, side, rvm.confidence, &rvm.diff);
        }
        _ => {}
    }
    let view = Oriented::new(model, index, side)?;
    let start = view.from_model(theta_hat);
    let mut result = match kind {
        MethodKind::Vm => vm_upper(&view, &start, rvm),
        MethodKind::GridSearch => grid_search_upper(&view, &start, rvm, base),
        MethodKind::Bisection => bisection_upper(&view, &start, rvm, base),
        MethodKind::BinarySearch => binary_search_upper(&view, &start, rvm, base),
        MethodKind::SquaredPenalty => squared_penalty_upper(&view, &start, rvm, base),
        MethodKind::Rvm | MethodKind::Wald => unreachable!(),
    };
    result.endpoint *= side.sign();
    result.theta = DVector::from_vec(view.to_model(result.theta.as_slice()));
    Ok(result)
}

//! Trust-region search for the end points of a profile likelihood
//! confidence interval.
//!
//! The engine always searches for the upper end point of coordinate 0.
//! Other coordinates and the lower side are handled by [`Oriented`], which
//! permutes the requested coordinate to the front and optionally flips its
//! sign.

mod accept;
mod engine;
mod step;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use accept::{accept_step, near_target, value_rules, AcceptContext, Verdict, NEAR_TARGET_FACTOR};
pub use step::{propose_delta0, real_roots, slope_is_zero, Delta0Action, Delta0Proposal};

use crate::error::{Error, Result};
use crate::model::{DiffConfig, EvalCounter, LogLikelihood};
use crate::quadmodel::SingularPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RvmConfig {
    /// Confidence level 1 − α of the interval.
    pub confidence: f64,
    /// Precision constant of the acceptance rules.
    pub gamma: f64,
    /// δ0 is divided by this after a rejected step.
    pub beta0: f64,
    /// The nuisance radius is divided by this after a rejected step.
    pub beta1: f64,
    pub delta0_max: f64,
    /// Relative floor for discontinuity detection: ε = min_step_rel·(1+‖g‖).
    pub min_step_rel: f64,
    /// Initial δ0 and radius for unbounded subproblems.
    pub r0: f64,
    pub r1: f64,
    pub iter_max: usize,
    pub value_tol: f64,
    /// grad_tol = grad_tol_rel·(1+‖g(θ̂)‖).
    pub grad_tol_rel: f64,
    /// Iterations a frozen nuisance coordinate stays frozen.
    pub freeze_iterations: usize,
    /// Trial steps per iteration before giving up.
    pub max_trials: usize,
    pub recovery_bisections: usize,
    pub diff: DiffConfig,
    pub singular: SingularPolicy,
    pub trace: bool,
}

impl Default for RvmConfig {
    fn default() -> Self {
        Self {
            confidence: 0.95,
            gamma: 0.5,
            beta0: 2.0,
            beta1: 1.5,
            delta0_max: 1e3,
            min_step_rel: 1e-8,
            r0: 1.0,
            r1: 1.0,
            iter_max: 200,
            value_tol: 1e-4,
            grad_tol_rel: 1e-4,
            freeze_iterations: 3,
            max_trials: 200,
            recovery_bisections: 50,
            diff: DiffConfig::default(),
            singular: SingularPolicy::default(),
            trace: false,
        }
    }
}

impl RvmConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return fail("confidence must be in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail("gamma must be in (0, 1)");
        }
        if !(self.beta0 > 1.0 && self.beta1 > 1.0) {
            return fail("beta0 and beta1 must exceed 1");
        }
        let positive = [
            self.delta0_max,
            self.min_step_rel,
            self.r0,
            self.r1,
            self.value_tol,
            self.grad_tol_rel,
            self.singular.svd_rank_rtol,
            self.singular.eig_semidef_tol,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return fail("tolerances, step limits and radii must be positive");
        }
        if self.iter_max == 0 || self.max_trials == 0 {
            return fail("iteration limits must be positive");
        }
        self.diff.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointStatus {
    Converged,
    Inestimable,
    IterationLimit,
    Failed,
}

impl EndpointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EndpointStatus::Converged => "converged",
            EndpointStatus::Inestimable => "inestimable",
            EndpointStatus::IterationLimit => "iteration_limit",
            EndpointStatus::Failed => "failed",
        }
    }
}

impl fmt::Display for EndpointStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EndpointStatus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "converged" => Ok(Self::Converged),
            "inestimable" => Ok(Self::Inestimable),
            "iteration_limit" => Ok(Self::IterationLimit),
            "failed" => Ok(Self::Failed),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Lower => "lower",
            Side::Upper => "upper",
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lower" => Ok(Side::Lower),
            "upper" => Ok(Side::Upper),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

/// One trial step of the search.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub trial: usize,
    pub delta0: f64,
    /// Norm of the nuisance step.
    pub radius: f64,
    pub current: f64,
    pub value: f64,
    pub accepted: bool,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter={} trial={} delta0={:.6e} r={:.6e} lbar={:.10} l={:.10} accepted={}",
            self.iteration, self.trial, self.delta0, self.radius, self.current, self.value, self.accepted
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointResult {
    /// Bound on the requested coordinate; ±∞ for inestimable parameters.
    pub endpoint: f64,
    pub status: EndpointStatus,
    /// Parameter vector at the end point (original coordinates).
    pub theta: DVector<f64>,
    /// ℓ at `theta`.
    pub value: f64,
    pub iterations: usize,
    pub evals: EvalCounter,
    /// The search stopped at a jump in the profile likelihood.
    pub discontinuity: bool,
    pub trace: Vec<TraceRecord>,
}

impl EndpointResult {
    pub fn converged(&self) -> bool {
        self.status == EndpointStatus::Converged
    }

    pub(crate) fn failed(theta: DVector<f64>, evals: EvalCounter) -> Self {
        Self {
            endpoint: f64::NAN,
            status: EndpointStatus::Failed,
            value: f64::NEG_INFINITY,
            theta,
            iterations: 0,
            evals,
            discontinuity: false,
            trace: Vec::new(),
        }
    }
}

/// A view of a model with coordinate `index` moved to position 0 and, for
/// lower end points, its sign flipped.
pub struct Oriented<'m> {
    model: &'m dyn LogLikelihood,
    order: Vec<usize>,
    sign: f64,
}

impl<'m> Oriented<'m> {
    pub fn new(model: &'m dyn LogLikelihood, index: usize, side: Side) -> Result<Self> {
        let n = model.dim();
        if index >= n {
            return Err(Error::Dimension { expected: n, got: index + 1 });
        }
        let mut order = Vec::with_capacity(n);
        order.push(index);
        order.extend((0..n).filter(|&j| j != index));
        Ok(Self {
            model,
            order,
            sign: side.sign(),
        })
    }

    /// Map a vector in this view back to the model's coordinates.
    pub fn to_model(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; theta.len()];
        for (k, &j) in self.order.iter().enumerate() {
            out[j] = theta[k];
        }
        out[self.order[0]] *= self.sign;
        out
    }

    pub fn from_model(&self, theta: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.order.iter().map(|&j| theta[j]).collect();
        out[0] *= self.sign;
        out
    }

    fn factor(&self, k: usize) -> f64 {
        if k == 0 {
            self.sign
        } else {
            1.0
        }
    }
}

impl LogLikelihood for Oriented<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.model.value(&self.to_model(theta))
    }

    fn gradient(&self, theta: &[f64]) -> Option<DVector<f64>> {
        let g = self.model.gradient(&self.to_model(theta))?;
        Some(DVector::from_fn(g.len(), |k, _| self.factor(k) * g[self.order[k]]))
    }

    fn hessian(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        let h = self.model.hessian(&self.to_model(theta))?;
        let n = h.nrows();
        Some(DMatrix::from_fn(n, n, |a, b| {
            self.factor(a) * self.factor(b) * h[(self.order[a], self.order[b])]
        }))
    }
}

pub(crate) fn check_start(model: &dyn LogLikelihood, theta_hat: &[f64]) -> Result<()> {
    if theta_hat.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: theta_hat.len(),
        });
    }
    if let Some(index) = theta_hat.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteParameter { index });
    }
    Ok(())
}

/// Upper end point for coordinate 0.
pub fn find_upper_endpoint(model: &dyn LogLikelihood, theta_hat: &[f64], cfg: &RvmConfig) -> Result<EndpointResult> {
    check_start(model, theta_hat)?;
    cfg.validate()?;
    Ok(engine::search(model, theta_hat, cfg))
}

/// Lower end point for coordinate 0: the upper search on the model flipped
/// in θ0, negated.
pub fn find_lower_endpoint(model: &dyn LogLikelihood, theta_hat: &[f64], cfg: &RvmConfig) -> Result<EndpointResult> {
    find_endpoint(model, theta_hat, 0, Side::Lower, cfg)
}

/// End point for any coordinate and side.
pub fn find_endpoint(
    model: &dyn LogLikelihood,
    theta_hat: &[f64],
    index: usize,
    side: Side,
    cfg: &RvmConfig,
) -> Result<EndpointResult> {
    check_start(model, theta_hat)?;
    let view = Oriented::new(model, index, side)?;
    let start = view.from_model(theta_hat);
    let mut result = find_upper_endpoint(&view, &start, cfg)?;
    result.endpoint *= side.sign();
    result.theta = DVector::from_vec(view.to_model(result.theta.as_slice()));
    Ok(result)
}

/// Both end points of the interval for coordinate `index`.
pub fn find_interval(
    model: &dyn LogLikelihood,
    theta_hat: &[f64],
    index: usize,
    cfg: &RvmConfig,
) -> Result<(EndpointResult, EndpointResult)> {
    Ok((
        find_endpoint(model, theta_hat, index, Side::Lower, cfg)?,
        find_endpoint(model, theta_hat, index, Side::Upper, cfg)?,
    ))
}

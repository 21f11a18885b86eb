//! Confidence intervals for a scalar function f(θ).
//!
//! The interval for φ = f(θ) is the parameter interval of φ in the augmented
//! likelihood ℓ̌(φ, θ) = ℓ(θ) − ½χ²₁((f(θ) − φ)/ε)², where φ is treated
//! as an extra coordinate placed first. Each end point is within ε of the
//! exact profile end point of f.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{central_gradient, central_hessian, DiffConfig, LogLikelihood};
use crate::rvm::{check_start, find_endpoint, EndpointResult, RvmConfig, Side};
use crate::stats::chi2_1_quantile;

pub trait ParameterFunction: Sync {
    fn value(&self, theta: &[f64]) -> f64;
    fn gradient(&self, _theta: &[f64]) -> Option<DVector<f64>> {
        None
    }
    fn hessian(&self, _theta: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> ParameterFunction for F {
    fn value(&self, theta: &[f64]) -> f64 {
        self(theta)
    }
}

/// cᵀθ + offset.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunction {
    pub coefficients: DVector<f64>,
    pub offset: f64,
}

impl LinearFunction {
    pub fn new(coefficients: Vec<f64>, offset: f64) -> Self {
        Self {
            coefficients: DVector::from_vec(coefficients),
            offset,
        }
    }

    /// f(θ) = θᵢ.
    pub fn coordinate(n: usize, index: usize) -> Self {
        let mut c = vec![0.0; n];
        c[index] = 1.0;
        Self::new(c, 0.0)
    }
}

impl ParameterFunction for LinearFunction {
    fn value(&self, theta: &[f64]) -> f64 {
        self.coefficients.iter().zip(theta).map(|(c, t)| c * t).sum::<f64>() + self.offset
    }
    fn gradient(&self, _: &[f64]) -> Option<DVector<f64>> {
        Some(self.coefficients.clone())
    }
    fn hessian(&self, _: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.coefficients.len();
        Some(DMatrix::zeros(n, n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FunctionCiConfig {
    /// Error bound on the reported end points, in units of f.
    pub epsilon: f64,
}

impl Default for FunctionCiConfig {
    fn default() -> Self {
        Self { epsilon: 1e-3 }
    }
}

/// ℓ̌ over (φ, θ).
pub struct ModifiedLikelihood<'a> {
    model: &'a dyn LogLikelihood,
    function: &'a dyn ParameterFunction,
    /// χ²₁/ε².
    weight: f64,
    diff: DiffConfig,
}

impl<'a> ModifiedLikelihood<'a> {
    pub fn new(
        model: &'a dyn LogLikelihood,
        function: &'a dyn ParameterFunction,
        epsilon: f64,
        confidence: f64,
        diff: DiffConfig,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        let chi2 = chi2_1_quantile(confidence)?;
        Ok(Self {
            model,
            function,
            weight: chi2 / (epsilon * epsilon),
            diff,
        })
    }

    fn f_gradient(&self, theta: &[f64]) -> Option<DVector<f64>> {
        self.function
            .gradient(theta)
            .or_else(|| central_gradient(|t| self.function.value(t), theta, &self.diff).ok().map(|r| r.0))
    }

    fn f_hessian(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        self.function
            .hessian(theta)
            .or_else(|| central_hessian(|t| self.function.value(t), theta, &self.diff).ok().map(|r| r.0))
    }
}

impl LogLikelihood for ModifiedLikelihood<'_> {
    fn dim(&self) -> usize {
        self.model.dim() + 1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let theta = &x[1..];
        let r = self.function.value(theta) - x[0];
        self.model.value(theta) - 0.5 * self.weight * r * r
    }

    fn gradient(&self, x: &[f64]) -> Option<DVector<f64>> {
        let theta = &x[1..];
        let gl = self.model.gradient(theta)?;
        let gf = self.f_gradient(theta)?;
        let r = self.function.value(theta) - x[0];
        let mut g = DVector::zeros(x.len());
        g[0] = self.weight * r;
        g.rows_mut(1, theta.len()).copy_from(&(gl - gf * (self.weight * r)));
        Some(g)
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let theta = &x[1..];
        let n = theta.len();
        let hl = self.model.hessian(theta)?;
        let gf = self.f_gradient(theta)?;
        let hf = self.f_hessian(theta)?;
        let r = self.function.value(theta) - x[0];
        let w = self.weight;
        let mut h = DMatrix::zeros(n + 1, n + 1);
        h[(0, 0)] = -w;
        for i in 0..n {
            h[(0, i + 1)] = w * gf[i];
            h[(i + 1, 0)] = w * gf[i];
        }
        let block = hl - (&gf * gf.transpose() + hf * r) * w;
        h.view_mut((1, 1), (n, n)).copy_from(&block);
        Some(h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionEndpoint {
    /// The search result on the augmented model; `endpoint` is φ̌ and
    /// `theta` is (φ̌, θ̌).
    pub result: EndpointResult,
    /// |f(θ̌) − φ̌|.
    pub residual: f64,
}

impl FunctionEndpoint {
    pub fn endpoint(&self) -> f64 {
        self.result.endpoint
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionInterval {
    pub estimate: f64,
    pub lower: FunctionEndpoint,
    pub upper: FunctionEndpoint,
    /// f has zero gradient at θ̂ and at both end points, so the interval
    /// only reflects the penalty width ±ε.
    pub degenerate: bool,
}

/// Interval for f(θ) given the MLE θ̂.
pub fn find_function_ci(
    model: &dyn LogLikelihood,
    function: &dyn ParameterFunction,
    theta_hat: &[f64],
    cfg: &FunctionCiConfig,
    rvm: &RvmConfig,
) -> Result<FunctionInterval> {
    check_start(model, theta_hat)?;
    let modified = ModifiedLikelihood::new(model, function, cfg.epsilon, rvm.confidence, rvm.diff)?;
    let estimate = function.value(theta_hat);
    if !estimate.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let mut start = Vec::with_capacity(theta_hat.len() + 1);
    start.push(estimate);
    start.extend_from_slice(theta_hat);

    let run = |side| -> Result<FunctionEndpoint> {
        let result = find_endpoint(&modified, &start, 0, side, rvm)?;
        let x = result.theta.as_slice();
        let residual = (function.value(&x[1..]) - x[0]).abs();
        Ok(FunctionEndpoint { result, residual })
    };
    let lower = run(Side::Lower)?;
    let upper = run(Side::Upper)?;

    let flat = |theta: &[f64]| {
        modified
            .f_gradient(theta)
            .is_some_and(|g| g.amax() <= 1e-12 * (1.0 + function.value(theta).abs()))
    };
    let degenerate = flat(theta_hat) && flat(&lower.result.theta.as_slice()[1..]) && flat(&upper.result.theta.as_slice()[1..]);
    Ok(FunctionInterval {
        estimate,
        lower,
        upper,
        degenerate,
    })
}

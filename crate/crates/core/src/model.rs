//! Log-likelihood interface, evaluation accounting and numerical derivatives.
//!
//! Every search in this crate talks to a model through an [`Objective`], which
//! owns an [`EvalCounter`]. Analytic derivatives are charged at the number of
//! value calls a central-difference stencil would have needed, so methods with
//! and without Hessians are compared on the same currency.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A twice-differentiable log-likelihood over `dim()` parameters.
///
/// `value` must be a pure function of `theta`. Derivative methods return
/// `None` when no closed form is available; callers then fall back to central
/// differences.
pub trait LogLikelihood: Sync {
    fn dim(&self) -> usize;

    fn value(&self, theta: &[f64]) -> f64;

    fn gradient(&self, _theta: &[f64]) -> Option<DVector<f64>> {
        None
    }

    fn hessian(&self, _theta: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

impl<T: LogLikelihood + ?Sized> LogLikelihood for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, theta: &[f64]) -> f64 {
        (**self).value(theta)
    }
    fn gradient(&self, theta: &[f64]) -> Option<DVector<f64>> {
        (**self).gradient(theta)
    }
    fn hessian(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        (**self).hessian(theta)
    }
}

impl<T: LogLikelihood + ?Sized> LogLikelihood for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, theta: &[f64]) -> f64 {
        (**self).value(theta)
    }
    fn gradient(&self, theta: &[f64]) -> Option<DVector<f64>> {
        (**self).gradient(theta)
    }
    fn hessian(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        (**self).hessian(theta)
    }
}

/// A validated parameter vector: non-empty and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(DVector<f64>);

impl ParameterVector {
    pub fn new(values: impl Into<Vec<f64>>) -> Result<Self> {
        let values: Vec<f64> = values.into();
        if values.is_empty() {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameter { index });
        }
        Ok(Self(DVector::from_vec(values)))
    }

    pub fn from_vector(values: DVector<f64>) -> Result<Self> {
        Self::new(values.as_slice().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// Function-evaluation accounting for one search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounter {
    pub n_value: u64,
    pub n_gradient_equiv: u64,
    pub n_hessian_equiv: u64,
}

impl EvalCounter {
    pub fn total(&self) -> u64 {
        self.n_value + self.n_gradient_equiv + self.n_hessian_equiv
    }

    pub fn merge(&mut self, other: &EvalCounter) {
        self.n_value += other.n_value;
        self.n_gradient_equiv += other.n_gradient_equiv;
        self.n_hessian_equiv += other.n_hessian_equiv;
    }
}

/// Step sizes for central differences.
///
/// Gradients use `max(rel_step * |x|, abs_floor)`; Hessians use the larger
/// `hessian_*` pair because second differences lose roughly twice as many
/// digits.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DiffConfig {
    pub rel_step: f64,
    pub abs_floor: f64,
    pub hessian_rel_step: f64,
    pub hessian_abs_floor: f64,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self {
            rel_step: 1e-6,
            abs_floor: 1e-8,
            hessian_rel_step: 1e-4,
            hessian_abs_floor: 1e-4,
        }
    }
}

impl DiffConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.rel_step,
            self.abs_floor,
            self.hessian_rel_step,
            self.hessian_abs_floor,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config("finite-difference steps must be positive".into()))
        }
    }

    fn gradient_step(&self, x: f64) -> f64 {
        (self.rel_step * x.abs()).max(self.abs_floor)
    }

    fn hessian_step(&self, x: f64) -> f64 {
        (self.hessian_rel_step * x.abs()).max(self.hessian_abs_floor)
    }
}

/// Central-difference gradient of `f` at `x`. Returns the gradient and the
/// number of calls made (`2n`).
pub fn central_gradient<F>(mut f: F, x: &[f64], cfg: &DiffConfig) -> Result<(DVector<f64>, u64)>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x.len();
    let mut point = x.to_vec();
    let mut grad = DVector::zeros(n);
    for j in 0..n {
        let h = cfg.gradient_step(x[j]);
        point[j] = x[j] + h;
        let up = f(&point);
        point[j] = x[j] - h;
        let down = f(&point);
        point[j] = x[j];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Stencil { coordinate: j });
        }
        grad[j] = (up - down) / (2.0 * h);
    }
    Ok((grad, 2 * n as u64))
}

/// Central second differences of `f` at `x`, symmetrized. Uses `2n² + 1`
/// calls: one centre, two per diagonal entry, four per off-diagonal pair.
pub fn central_hessian<F>(mut f: F, x: &[f64], cfg: &DiffConfig) -> Result<(DMatrix<f64>, u64)>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|&v| cfg.hessian_step(v)).collect();
    let mut point = x.to_vec();
    let centre = f(&point);
    if !centre.is_finite() {
        return Err(Error::Stencil { coordinate: 0 });
    }
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let h = steps[i];
        point[i] = x[i] + h;
        let up = f(&point);
        point[i] = x[i] - h;
        let down = f(&point);
        point[i] = x[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Stencil { coordinate: i });
        }
        hess[(i, i)] = (up - 2.0 * centre + down) / (h * h);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (hi, hj) = (steps[i], steps[j]);
            let mut corner = |si: f64, sj: f64, point: &mut Vec<f64>| {
                point[i] = x[i] + si * hi;
                point[j] = x[j] + sj * hj;
                let v = f(point);
                point[i] = x[i];
                point[j] = x[j];
                v
            };
            let pp = corner(1.0, 1.0, &mut point);
            let pm = corner(1.0, -1.0, &mut point);
            let mp = corner(-1.0, 1.0, &mut point);
            let mm = corner(-1.0, -1.0, &mut point);
            if ![pp, pm, mp, mm].iter().all(|v| v.is_finite()) {
                return Err(Error::Stencil { coordinate: i });
            }
            let v = (pp - pm - mp + mm) / (4.0 * hi * hj);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((hess, (2 * n * n + 1) as u64))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// A model together with its derivative configuration and evaluation counter.
pub struct Objective<'m> {
    model: &'m dyn LogLikelihood,
    diff: DiffConfig,
    counter: EvalCounter,
}

impl<'m> Objective<'m> {
    pub fn new(model: &'m dyn LogLikelihood, diff: DiffConfig) -> Self {
        Self {
            model,
            diff,
            counter: EvalCounter::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn model(&self) -> &'m dyn LogLikelihood {
        self.model
    }

    pub fn diff_config(&self) -> &DiffConfig {
        &self.diff
    }

    pub fn counter(&self) -> EvalCounter {
        self.counter
    }

    /// Checked evaluation: validates the dimension first.
    pub fn eval_value(&mut self, theta: &ParameterVector) -> Result<f64> {
        self.check_dim(theta.dim())?;
        Ok(self.value(theta.as_slice()))
    }

    /// ℓ(θ), with NaN mapped to −∞ so it is treated as inadmissible.
    pub fn value(&mut self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim());
        self.counter.n_value += 1;
        let v = self.model.value(theta);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    pub fn gradient(&mut self, theta: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(theta.len())?;
        let n = self.dim() as u64;
        if let Some(g) = self.model.gradient(theta) {
            self.counter.n_gradient_equiv += 2 * n;
            return Ok(g);
        }
        let model = self.model;
        let result = central_gradient(|x| model.value(x), theta, &self.diff);
        // failed stencils still consumed their calls
        self.counter.n_gradient_equiv += 2 * n;
        Ok(result?.0)
    }

    pub fn hessian(&mut self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(theta.len())?;
        let n = self.dim() as u64;
        if let Some(mut h) = self.model.hessian(theta) {
            symmetrize(&mut h);
            self.counter.n_hessian_equiv += 2 * n * (n + 1);
            return Ok(h);
        }
        let model = self.model;
        let result = central_hessian(|x| model.value(x), theta, &self.diff);
        self.counter.n_hessian_equiv += 2 * n * n + 1;
        Ok(result?.0)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            Err(Error::Dimension {
                expected: self.dim(),
                got,
            })
        } else {
            Ok(())
        }
    }
}

/// Discrepancies between analytic and central-difference derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeReport {
    /// ‖g_analytic − g_numeric‖ / ‖g_numeric‖ (L2).
    pub gradient_rel_error: Option<f64>,
    /// Same ratio for the Hessian in the Frobenius norm.
    pub hessian_rel_error: Option<f64>,
    pub flagged: bool,
}

pub const GRADIENT_FLAG_THRESHOLD: f64 = 1e-4;
pub const HESSIAN_FLAG_THRESHOLD: f64 = 1e-3;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    analytic / numeric.max(1e-8)
}

/// Compare the model's analytic derivatives against central differences.
pub fn check_derivatives(
    model: &dyn LogLikelihood,
    theta: &[f64],
    cfg: &DiffConfig,
) -> Result<DerivativeReport> {
    if theta.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: theta.len(),
        });
    }
    let gradient_rel_error = match model.gradient(theta) {
        Some(analytic) => {
            let (numeric, _) = central_gradient(|x| model.value(x), theta, cfg)?;
            Some(relative_error((&analytic - &numeric).norm(), numeric.norm()))
        }
        None => None,
    };
    let hessian_rel_error = match model.hessian(theta) {
        Some(mut analytic) => {
            symmetrize(&mut analytic);
            let (numeric, _) = central_hessian(|x| model.value(x), theta, cfg)?;
            Some(relative_error((&analytic - &numeric).norm(), numeric.norm()))
        }
        None => None,
    };
    let flagged = gradient_rel_error.is_some_and(|e| e > GRADIENT_FLAG_THRESHOLD)
        || hessian_rel_error.is_some_and(|e| e > HESSIAN_FLAG_THRESHOLD);
    Ok(DerivativeReport {
        gradient_rel_error,
        hessian_rel_error,
        flagged,
    })
}

/// ℓ(θ) = −½ (θ−μ)ᵀ P (θ−μ) with precision matrix `P`. Used by tests, demos and
/// the acceptance suite.
#[derive(Debug, Clone)]
pub struct GaussianLogLikelihood {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
}

impl GaussianLogLikelihood {
    pub fn new(mean: DVector<f64>, precision: DMatrix<f64>) -> Self {
        assert_eq!(mean.len(), precision.nrows());
        assert_eq!(precision.nrows(), precision.ncols());
        Self { mean, precision }
    }

    /// −½‖θ‖² in `n` dimensions.
    pub fn standard(n: usize) -> Self {
        Self::new(DVector::zeros(n), DMatrix::identity(n, n))
    }

    /// Build from a covariance matrix (must be invertible).
    pub fn from_covariance(mean: DVector<f64>, covariance: &DMatrix<f64>) -> Option<Self> {
        let precision = covariance.clone().try_inverse()?;
        let mut precision = precision;
        symmetrize(&mut precision);
        Some(Self::new(mean, precision))
    }
}

impl LogLikelihood for GaussianLogLikelihood {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let d = DVector::from_column_slice(theta) - &self.mean;
        -0.5 * d.dot(&(&self.precision * &d))
    }

    fn gradient(&self, theta: &[f64]) -> Option<DVector<f64>> {
        let d = DVector::from_column_slice(theta) - &self.mean;
        Some(-(&self.precision * d))
    }

    fn hessian(&self, _theta: &[f64]) -> Option<DMatrix<f64>> {
        Some(-self.precision.clone())
    }
}

/// Adapter that hides the analytic derivatives of a model, forcing the
/// numeric path.
pub struct ValueOnly<M>(pub M);

impl<M: LogLikelihood> LogLikelihood for ValueOnly<M> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, theta: &[f64]) -> f64 {
        self.0.value(theta)
    }
}

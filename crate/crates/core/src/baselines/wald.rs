use nalgebra::{Cholesky, DVector};

use crate::error::Result;
use crate::model::{DiffConfig, LogLikelihood, Objective};
use crate::rvm::{EndpointResult, EndpointStatus, Side};
use crate::stats::normal_quantile_two_sided;

/// Wald end point θ̂ᵢ ± z·√Σᵢᵢ with Σ = (−H(θ̂))⁻¹. Fails when H is not
/// negative definite.
pub fn wald_endpoint(
    model: &dyn LogLikelihood,
    theta_hat: &[f64],
    index: usize,
    side: Side,
    confidence: f64,
    diff: &DiffConfig,
) -> Result<EndpointResult> {
    let z = normal_quantile_two_sided(confidence)?;
    let mut obj = Objective::new(model, *diff);
    let theta = DVector::from_column_slice(theta_hat);
    let h = match obj.hessian(theta_hat) {
        Ok(h) => h,
        Err(_) => return Ok(EndpointResult::failed(theta, obj.counter())),
    };
    let Some(chol) = Cholesky::new(-h) else {
        return Ok(EndpointResult::failed(theta, obj.counter()));
    };
    let cov = chol.inverse();
    let sd = cov[(index, index)].sqrt();
    let shift = cov.column(index) * (side.sign() * z / sd);
    let at = &theta + shift;
    let value = obj.value(at.as_slice());
    Ok(EndpointResult {
        endpoint: theta_hat[index] + side.sign() * z * sd,
        status: EndpointStatus::Converged,
        theta: at,
        value,
        iterations: 1,
        evals: obj.counter(),
        discontinuity: false,
        trace: Vec::new(),
    })
}

/// Both Wald end points.
pub fn wald_ci(
    model: &dyn LogLikelihood,
    theta_hat: &[f64],
    index: usize,
    confidence: f64,
    diff: &DiffConfig,
) -> Result<(EndpointResult, EndpointResult)> {
    Ok((
        wald_endpoint(model, theta_hat, index, Side::Lower, confidence, diff)?,
        wald_endpoint(model, theta_hat, index, Side::Upper, confidence, diff)?,
    ))
}

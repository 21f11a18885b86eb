//! The plain Newton-type iteration on the constrained problem: no trust
//! region, no handling of singular or unbounded local models. Fails as soon
//! as the nuisance Hessian is singular or the profile quadratic has no real
//! root.

use nalgebra::{DVector, SVD};

use crate::model::{LogLikelihood, Objective};
use crate::quadmodel::{
    nuisance_optimum_with, profile_coefficients_with, NuisanceInverse, QuadraticModel,
};
use crate::rvm::{real_roots, EndpointResult, EndpointStatus, RvmConfig};
use crate::stats::likelihood_threshold;

/// Upper end point for coordinate 0.
pub fn vm_upper(model: &dyn LogLikelihood, theta_hat: &[f64], cfg: &RvmConfig) -> EndpointResult {
    let mut obj = Objective::new(model, cfg.diff);
    let mut theta = DVector::from_column_slice(theta_hat);
    let max_value = obj.value(theta_hat);
    if !max_value.is_finite() {
        return EndpointResult::failed(theta, obj.counter());
    }
    let target = likelihood_threshold(max_value, cfg.confidence).expect("validated confidence");
    let mut current = max_value;
    let mut grad_tol = None;

    let finish = |status, theta: DVector<f64>, value, iterations, obj: &Objective<'_>| EndpointResult {
        endpoint: theta[0],
        status,
        theta,
        value,
        iterations,
        evals: obj.counter(),
        discontinuity: false,
        trace: Vec::new(),
    };

    for iteration in 1..=cfg.iter_max {
        let Ok(g) = obj.gradient(theta.as_slice()) else {
            return finish(EndpointStatus::Failed, theta, current, iteration, &obj);
        };
        let tol = *grad_tol.get_or_insert(cfg.grad_tol_rel * (1.0 + g.norm()));
        let nuisance_norm = g.rows(1, g.len() - 1).norm();
        if (current - target).abs() <= cfg.value_tol && nuisance_norm <= tol {
            return finish(EndpointStatus::Converged, theta, current, iteration - 1, &obj);
        }
        let Ok(h) = obj.hessian(theta.as_slice()) else {
            return finish(EndpointStatus::Failed, theta, current, iteration, &obj);
        };
        let qm = QuadraticModel::from_derivatives(current, &g, &h);
        if qm.nuisance_dim() > 0 {
            let sigma = SVD::new(qm.h_nuisance.clone(), false, false).singular_values;
            if !(sigma.min() > cfg.singular.svd_rank_rtol * sigma.max()) {
                return finish(EndpointStatus::Failed, theta, current, iteration, &obj);
            }
        }
        let inverse = NuisanceInverse::compute(&qm, &cfg.singular);
        let mut pq = profile_coefficients_with(&qm, &inverse, target);
        // curvature and slope below their rounding level are zero, so an
        // exactly flat profile has no root
        let hg = &inverse.matrix * &qm.h0_nuisance;
        if pq.a.abs() <= 1e-8 * (qm.h00.abs() + qm.h0_nuisance.dot(&hg).abs()) {
            pq.a = 0.0;
        }
        if pq.p.abs() <= tol {
            pq.p = 0.0;
        }
        let roots = real_roots(&pq);
        if roots.is_empty() {
            return finish(EndpointStatus::Failed, theta, current, iteration, &obj);
        }
        let step_for = |d0: f64| {
            let mut s = DVector::zeros(theta.len());
            s[0] = d0;
            s.rows_mut(1, theta.len() - 1)
                .copy_from(&nuisance_optimum_with(&qm, &inverse, d0).step);
            s
        };
        let step = if iteration == 1 {
            match roots.iter().copied().filter(|&r| r > 0.0).reduce(f64::min) {
                Some(r) => step_for(r),
                None => return finish(EndpointStatus::Failed, theta, current, iteration, &obj),
            }
        } else {
            roots
                .iter()
                .map(|&r| step_for(r))
                .min_by(|a, b| a.norm().total_cmp(&b.norm()))
                .expect("non-empty roots")
        };
        let candidate = &theta + step;
        if candidate.iter().any(|v| !v.is_finite()) {
            return finish(EndpointStatus::Failed, theta, current, iteration, &obj);
        }
        let value = obj.value(candidate.as_slice());
        if !value.is_finite() {
            return finish(EndpointStatus::Failed, candidate, value, iteration, &obj);
        }
        theta = candidate;
        current = value;
    }
    if let Ok(g) = obj.gradient(theta.as_slice()) {
        let tol = grad_tol.unwrap_or(cfg.grad_tol_rel);
        if (current - target).abs() <= cfg.value_tol && g.rows(1, g.len() - 1).norm() <= tol {
            return finish(EndpointStatus::Converged, theta, current, cfg.iter_max, &obj);
        }
    }
    finish(EndpointStatus::IterationLimit, theta, current, cfg.iter_max, &obj)
}

//! Unconstrained surrogate: minimize −θ0 + w(ℓ(θ) − ℓ*)², with w raised
//! to its final value in tenfold stages.

use nalgebra::DVector;

use super::bfgs::{bfgs_minimize, Minimand};
use super::BaselineConfig;
use crate::model::{LogLikelihood, Objective};
use crate::rvm::{EndpointResult, EndpointStatus, RvmConfig};
use crate::stats::likelihood_threshold;

struct Penalized<'a, 'm> {
    obj: &'a mut Objective<'m>,
    target: f64,
    weight: f64,
    runaway: f64,
}

impl Minimand for Penalized<'_, '_> {
    fn dim(&self) -> usize {
        self.obj.dim()
    }
    fn value(&mut self, x: &[f64]) -> f64 {
        let d = self.obj.value(x) - self.target;
        -x[0] + self.weight * d * d
    }
    fn gradient(&mut self, x: &[f64]) -> Option<DVector<f64>> {
        let d = self.obj.value(x) - self.target;
        let mut g = self.obj.gradient(x).ok()? * (2.0 * self.weight * d);
        g[0] -= 1.0;
        Some(g)
    }
    fn stop(&self, x: &[f64]) -> bool {
        x[0] > self.runaway
    }
}

/// Upper end point for coordinate 0.
pub fn squared_penalty_upper(
    model: &dyn LogLikelihood,
    theta_hat: &[f64],
    rvm: &RvmConfig,
    base: &BaselineConfig,
) -> EndpointResult {
    let mut obj = Objective::new(model, rvm.diff);
    let max_value = obj.value(theta_hat);
    if !max_value.is_finite() {
        return EndpointResult::failed(DVector::from_column_slice(theta_hat), obj.counter());
    }
    let target = likelihood_threshold(max_value, rvm.confidence).expect("validated confidence");
    // raise the weight tenfold per stage, warm-starting each from the last
    let mut weights = vec![base.penalty_weight];
    while weights[weights.len() - 1] > 1.0 {
        let w = weights[weights.len() - 1] / 10.0;
        weights.push(w.max(1.0));
    }
    weights.reverse();
    let mut x = theta_hat.to_vec();
    let mut iterations = 0;
    let mut m = None;
    for weight in weights {
        let mut fun = Penalized {
            obj: &mut obj,
            target,
            weight,
            runaway: theta_hat[0] + base.unbounded_limit,
        };
        let stage = bfgs_minimize(&mut fun, &x, &base.optimizer);
        iterations += stage.iterations;
        x = stage.x.as_slice().to_vec();
        let stop = stage.stopped || !stage.value.is_finite();
        m = Some(stage);
        if stop {
            break;
        }
    }
    let m = m.expect("at least one stage");
    let value = obj.value(m.x.as_slice());
    let status = if m.stopped {
        EndpointStatus::Inestimable
    } else if m.converged && (value - target).abs() <= base.penalty_tol {
        EndpointStatus::Converged
    } else if m.iterations >= base.optimizer.max_iters {
        EndpointStatus::IterationLimit
    } else {
        EndpointStatus::Failed
    };
    EndpointResult {
        endpoint: match status {
            EndpointStatus::Inestimable => f64::INFINITY,
            _ => m.x[0],
        },
        status,
        theta: m.x,
        value,
        iterations,
        evals: obj.counter(),
        discontinuity: false,
        trace: Vec::new(),
    }
}

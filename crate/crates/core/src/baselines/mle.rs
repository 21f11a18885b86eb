//! Maximum likelihood fit: BFGS followed by a trust-region Newton polish.

use nalgebra::{Cholesky, DVector};

use super::bfgs::{bfgs_minimize, Minimand, OptimizerConfig};
use crate::error::{Error, Result};
use crate::model::{DiffConfig, EvalCounter, LogLikelihood, Objective};
use crate::quadmodel::{quadratic_objective, solve_trust_subproblem};

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub theta: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    /// ‖g‖ ≤ 1e-6·(1+|ℓ|), or a Newton decrement ½gᵀ(−H)⁻¹g ≤ 1e-12·(1+|ℓ|).
    pub stationary: bool,
    /// Stationary with a negative definite Hessian.
    pub converged: bool,
    pub newton_steps: usize,
    pub evals: EvalCounter,
}

/// −ℓ as a [`Minimand`] over the full parameter vector.
struct Negated<'a, 'm> {
    obj: &'a mut Objective<'m>,
}

impl Minimand for Negated<'_, '_> {
    fn dim(&self) -> usize {
        self.obj.dim()
    }
    fn value(&mut self, x: &[f64]) -> f64 {
        -self.obj.value(x)
    }
    fn gradient(&mut self, x: &[f64]) -> Option<DVector<f64>> {
        self.obj.gradient(x).ok().map(|g| -g)
    }
}

pub fn fit_mle(
    model: &dyn LogLikelihood,
    theta_init: &[f64],
    opt: &OptimizerConfig,
    diff: &DiffConfig,
) -> Result<MleFit> {
    if theta_init.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: theta_init.len(),
        });
    }
    let mut obj = Objective::new(model, *diff);
    if !obj.value(theta_init).is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let start = bfgs_minimize(&mut Negated { obj: &mut obj }, theta_init, opt);
    let mut theta = start.x;
    let mut value = -start.value;

    let mut radius = 1.0_f64;
    let mut stationary = false;
    let mut converged = false;
    let mut gradient_norm = f64::INFINITY;
    let mut steps = 0;
    for _ in 0..1000 {
        let g = obj.gradient(theta.as_slice())?;
        gradient_norm = g.norm();
        let h = obj.hessian(theta.as_slice())?;
        let tol = 1e-6 * (1.0 + value.abs());
        // a Newton decrement at rounding level also counts: along stiff
        // directions ‖g‖ can stay above tol with no achievable ascent left
        let decrement = Cholesky::new(-&h).map(|c| 0.5 * g.dot(&c.solve(&g)));
        let flat = decrement.is_some_and(|d| d <= 1e-12 * (1.0 + value.abs()));
        stationary = gradient_norm <= tol || flat;
        converged = stationary && decrement.is_some();
        // Newton steps are cheap near the optimum; keep going until they
        // stop helping
        if gradient_norm <= 1e-4 * tol || (stationary && !converged) {
            break;
        }
        let trial = solve_trust_subproblem(&g, &h, radius);
        let predicted = quadratic_objective(&g, &h, &trial.step);
        let candidate = &theta + &trial.step;
        let new_value = obj.value(candidate.as_slice());
        let rho = (new_value - value) / predicted;
        let accepted = new_value.is_finite() && predicted > 0.0 && rho > 0.1;
        if accepted {
            theta = candidate;
            value = new_value;
            steps += 1;
        } else if stationary {
            break;
        }
        if !(rho > 0.25) || !new_value.is_finite() {
            radius *= 0.25;
        } else if rho > 0.75 && trial.on_boundary {
            radius *= 2.0;
        }
        if radius < 1e-14 * (1.0 + theta.norm()) {
            break;
        }
    }
    Ok(MleFit {
        theta,
        value,
        gradient_norm,
        stationary,
        converged,
        newton_steps: steps,
        evals: obj.counter(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianLogLikelihood;
    use nalgebra::DMatrix;

    #[test]
    fn quadratic_maximum() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let mean = DVector::from_vec(vec![3.0, -1.0]);
        let m = GaussianLogLikelihood::from_covariance(mean.clone(), &cov).unwrap();
        let fit = fit_mle(&m, &[10.0, 10.0], &OptimizerConfig::default(), &DiffConfig::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.theta - mean).norm() < 1e-6);
        assert!(fit.newton_steps <= 4);
    }

    #[test]
    fn flat_model_not_converged() {
        struct Flat;
        impl LogLikelihood for Flat {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, _: &[f64]) -> f64 {
                -1.0
            }
        }
        let fit = fit_mle(&Flat, &[0.0, 0.0], &OptimizerConfig::default(), &DiffConfig::default()).unwrap();
        assert!(!fit.converged);
    }
}

//! BFGS with an Armijo backtracking line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Converged when ‖∇f‖ ≤ grad_tol·(1 + |f|).
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Step multiplier per backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Step doublings allowed when the objective is linear along the search
    /// direction.
    pub max_expansions: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-6,
            c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            max_expansions: 10,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.max_iters > 0
            && self.grad_tol > 0.0
            && self.c1 > 0.0
            && self.c1 < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.max_backtracks > 0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config("invalid optimizer settings".into()))
        }
    }
}

/// A function to minimize.
pub trait Minimand {
    fn dim(&self) -> usize;
    fn value(&mut self, x: &[f64]) -> f64;
    /// `None` when the gradient cannot be computed at `x`.
    fn gradient(&mut self, x: &[f64]) -> Option<DVector<f64>>;
    /// Early exit, checked after every accepted step.
    fn stop(&self, _x: &[f64]) -> bool {
        false
    }
}

/// Closure-backed [`Minimand`].
pub struct FnMinimand<F, G> {
    pub dim: usize,
    pub f: F,
    pub g: G,
}

impl<F, G> Minimand for FnMinimand<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> DVector<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&mut self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn gradient(&mut self, x: &[f64]) -> Option<DVector<f64>> {
        Some((self.g)(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The stop predicate fired.
    pub stopped: bool,
    /// Value calls plus 2n per gradient.
    pub evals: u64,
}

pub fn bfgs_minimize(fun: &mut dyn Minimand, x0: &[f64], cfg: &OptimizerConfig) -> Minimum {
    let n = fun.dim();
    let grad_cost = 2 * n as u64;
    let mut evals = 0u64;
    let mut x = DVector::from_column_slice(x0);
    let mut f = fun.value(x.as_slice());
    evals += 1;
    let mut g = fun.gradient(x.as_slice()).unwrap_or_else(|| DVector::from_element(n, f64::NAN));
    evals += grad_cost;

    let done = |f: f64, g: &DVector<f64>| g.norm() <= cfg.grad_tol * (1.0 + f.abs());
    let result = |x: DVector<f64>, f, g, iterations, converged, stopped, evals| Minimum {
        x,
        value: f,
        gradient: g,
        iterations,
        converged,
        stopped,
        evals,
    };

    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return result(x, f, g, 0, false, false, evals);
    }
    let mut inv = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    for iter in 0..cfg.max_iters {
        if done(f, &g) {
            return result(x, f, g, iter, true, false, evals);
        }
        let mut d = -(&inv * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            inv = DMatrix::identity(n, n);
            d = -g.clone();
            slope = g.dot(&d);
            first = true;
        }
        if first {
            // keep the unscaled first step within unit length
            let norm = d.norm();
            if norm > 1.0 {
                d /= norm;
                slope /= norm;
            }
        }

        let mut t = 1.0;
        let mut scale = 1.0;
        let mut expansions = 0;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let trial = &x + &d * t;
            let ft = fun.value(trial.as_slice());
            evals += 1;
            if ft.is_finite() && ft <= f + cfg.c1 * t * slope {
                accepted = Some((trial, ft));
                // no curvature seen along d: extend the step while that holds
                while t == 1.0 && expansions < cfg.max_expansions {
                    let (_, fa) = accepted.as_ref().expect("set above");
                    let s = 2.0 * scale;
                    let trial = &x + &d * s;
                    let fe = fun.value(trial.as_slice());
                    evals += 1;
                    if !(fe.is_finite() && fe <= f + s * slope && fe < *fa) {
                        break;
                    }
                    scale = s;
                    expansions += 1;
                    accepted = Some((trial, fe));
                }
                break;
            }
            t *= cfg.backtrack;
        }
        let Some((x_new, f_new)) = accepted else {
            let converged = done(f, &g);
            return result(x, f, g, iter, converged, false, evals);
        };
        let g_new = match fun.gradient(x_new.as_slice()) {
            Some(g) if g.iter().all(|v| v.is_finite()) => g,
            _ => {
                evals += grad_cost;
                return result(x, f, g, iter, false, false, evals);
            }
        };
        evals += grad_cost;

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if first {
                inv = DMatrix::identity(n, n) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let hy = &inv * &y;
            let yhy = y.dot(&hy);
            // H ← H − ρ(H y sᵀ + s yᵀH) + (ρ² yᵀHy + ρ) s sᵀ
            inv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            inv += (&s * s.transpose()) * (rho * rho * yhy + rho);
            first = false;
        }
        x = x_new;
        f = f_new;
        g = g_new;
        if fun.stop(x.as_slice()) {
            return result(x, f, g, iter + 1, false, true, evals);
        }
    }
    let converged = done(f, &g);
    result(x, f, g, cfg.max_iters, converged, false, evals)
}

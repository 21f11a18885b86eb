//! Methods that evaluate the profile likelihood ℓ_PL(θ0) point by point:
//! binary search, quadratic-interpolation bisection and grid search. Each
//! profile value is a BFGS maximization over the nuisance parameters with θ0
//! held fixed, warm-started from the solution at the nearest θ0 evaluated
//! so far.

use nalgebra::DVector;

use super::bfgs::{bfgs_minimize, Minimand, OptimizerConfig};
use super::BaselineConfig;
use crate::model::{LogLikelihood, Objective};
use crate::rvm::{EndpointResult, EndpointStatus, RvmConfig};
use crate::stats::likelihood_threshold;

struct FixedFirst<'a, 'm> {
    obj: &'a mut Objective<'m>,
    theta0: f64,
    buf: Vec<f64>,
}

impl FixedFirst<'_, '_> {
    fn fill(&mut self, x: &[f64]) {
        self.buf[0] = self.theta0;
        self.buf[1..].copy_from_slice(x);
    }
}

impl Minimand for FixedFirst<'_, '_> {
    fn dim(&self) -> usize {
        self.buf.len() - 1
    }
    fn value(&mut self, x: &[f64]) -> f64 {
        self.fill(x);
        -self.obj.value(&self.buf)
    }
    fn gradient(&mut self, x: &[f64]) -> Option<DVector<f64>> {
        self.fill(x);
        let g = self.obj.gradient(&self.buf).ok()?;
        Some(-g.rows(1, g.len() - 1).into_owned())
    }
}

/// Profile likelihood evaluations for coordinate 0.
pub struct ProfileEvaluator<'m> {
    obj: Objective<'m>,
    opt: OptimizerConfig,
    /// (θ0, maximizing nuisance) for every evaluation so far.
    solved: Vec<(f64, Vec<f64>)>,
    nuisance: Vec<f64>,
    pub evaluations: usize,
}

impl<'m> ProfileEvaluator<'m> {
    pub fn new(obj: Objective<'m>, theta_hat: &[f64], opt: OptimizerConfig) -> Self {
        Self {
            obj,
            opt,
            solved: vec![(theta_hat[0], theta_hat[1..].to_vec())],
            nuisance: theta_hat[1..].to_vec(),
            evaluations: 0,
        }
    }

    pub fn objective(&self) -> &Objective<'m> {
        &self.obj
    }

    /// ℓ_PL(θ0) and the maximizing parameter vector, or `None` if the inner
    /// optimization produced no finite value.
    pub fn profile(&mut self, theta0: f64) -> Option<(f64, DVector<f64>)> {
        self.evaluations += 1;
        let n = self.obj.dim();
        if n == 1 {
            let v = self.obj.value(&[theta0]);
            return v.is_finite().then(|| (v, DVector::from_element(1, theta0)));
        }
        let mut fun = FixedFirst {
            obj: &mut self.obj,
            theta0,
            buf: vec![0.0; n],
        };
        let start = &self
            .solved
            .iter()
            .min_by(|a, b| (a.0 - theta0).abs().total_cmp(&(b.0 - theta0).abs()))
            .expect("contains θ̂")
            .1;
        let m = bfgs_minimize(&mut fun, start, &self.opt);
        if !m.value.is_finite() {
            return None;
        }
        self.nuisance = m.x.as_slice().to_vec();
        self.solved.push((theta0, self.nuisance.clone()));
        let mut theta = DVector::zeros(n);
        theta[0] = theta0;
        theta.rows_mut(1, n - 1).copy_from(&m.x);
        Some((-m.value, theta))
    }
}

struct Run<'m> {
    eval: ProfileEvaluator<'m>,
    theta_hat0: f64,
    max_value: f64,
    target: f64,
    budget: usize,
    best: (f64, DVector<f64>, f64),
}

enum Probe {
    Value(f64),
    Failed,
    Budget,
}

impl<'m> Run<'m> {
    fn start(model: &'m dyn LogLikelihood, theta_hat: &[f64], rvm: &RvmConfig, base: &BaselineConfig) -> Option<Self> {
        let mut obj = Objective::new(model, rvm.diff);
        let max_value = obj.value(theta_hat);
        if !max_value.is_finite() {
            return None;
        }
        let target = likelihood_threshold(max_value, rvm.confidence).expect("validated confidence");
        Some(Self {
            eval: ProfileEvaluator::new(obj, theta_hat, base.optimizer),
            theta_hat0: theta_hat[0],
            max_value,
            target,
            budget: rvm.iter_max,
            best: (0.0, DVector::from_column_slice(theta_hat), max_value),
        })
    }

    /// Evaluate at offset `x` from θ̂0, tracking the largest admissible offset.
    fn probe(&mut self, x: f64) -> Probe {
        if self.eval.evaluations >= self.budget {
            return Probe::Budget;
        }
        match self.eval.profile(self.theta_hat0 + x) {
            Some((v, theta)) => {
                if v >= self.target && x > self.best.0 {
                    self.best = (x, theta, v);
                }
                Probe::Value(v)
            }
            None => Probe::Failed,
        }
    }

    fn finish(self, status: EndpointStatus) -> EndpointResult {
        let (offset, theta, value) = self.best;
        EndpointResult {
            endpoint: match status {
                EndpointStatus::Inestimable => f64::INFINITY,
                _ => self.theta_hat0 + offset,
            },
            status,
            theta,
            value,
            iterations: self.eval.evaluations,
            evals: self.eval.objective().counter(),
            discontinuity: false,
            trace: Vec::new(),
        }
    }
}

macro_rules! probe_or_finish {
    ($run:expr, $x:expr) => {
        match $run.probe($x) {
            Probe::Value(v) => v,
            Probe::Failed => return $run.finish(EndpointStatus::Failed),
            Probe::Budget => return $run.finish(EndpointStatus::IterationLimit),
        }
    };
}

fn failed_start(theta_hat: &[f64]) -> EndpointResult {
    EndpointResult::failed(DVector::from_column_slice(theta_hat), Default::default())
}

/// Probe θ̂0 + 1, 10, 100, 1000 until ℓ_PL drops below ℓ*, then bisect the
/// bracket to width `value_tol`.
pub fn binary_search_upper(model: &dyn LogLikelihood, theta_hat: &[f64], rvm: &RvmConfig, base: &BaselineConfig) -> EndpointResult {
    let Some(mut run) = Run::start(model, theta_hat, rvm, base) else {
        return failed_start(theta_hat);
    };
    let mut lo = 0.0;
    let mut x = base.initial_step;
    let mut hi = loop {
        let v = probe_or_finish!(run, x);
        if v < run.target {
            break x;
        }
        lo = x;
        if x >= base.unbounded_limit {
            return run.finish(EndpointStatus::Inestimable);
        }
        x = (x * 10.0).min(base.unbounded_limit);
    };
    while hi - lo > rvm.value_tol {
        let mid = 0.5 * (lo + hi);
        let v = probe_or_finish!(run, mid);
        if v >= run.target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    run.finish(EndpointStatus::Converged)
}

/// Coefficients (A, B, C) of the parabola through three points.
fn parabola(p: [(f64, f64); 3]) -> Option<(f64, f64, f64)> {
    let [(x0, y0), (x1, y1), (x2, y2)] = p;
    let d = (x0 - x1) * (x0 - x2) * (x1 - x2);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d;
    let c = y0 - a * x0 * x0 - b * x0;
    Some((a, b, c))
}

/// Roots of A x² + B x + C = t.
fn parabola_roots((a, b, c): (f64, f64, f64), t: f64) -> Vec<f64> {
    crate::rvm::real_roots(&crate::quadmodel::ProfileQuadratic { a, p: b, q: c - t })
}

/// Parabola through (0, ℓ̂) with zero slope there and through (x, v).
fn flat_start_root(max_value: f64, x: f64, v: f64, target: f64) -> Option<f64> {
    let c = (v - max_value) / (x * x);
    if !(c < 0.0) {
        return None;
    }
    let r = ((target - max_value) / c).sqrt();
    r.is_finite().then_some(r)
}

/// Root finding on ℓ_PL − ℓ* with quadratic interpolation through the
/// MLE and the bracketing points.
pub fn bisection_upper(model: &dyn LogLikelihood, theta_hat: &[f64], rvm: &RvmConfig, base: &BaselineConfig) -> EndpointResult {
    let Some(mut run) = Run::start(model, theta_hat, rvm, base) else {
        return failed_start(theta_hat);
    };
    let max_value = run.max_value;
    let target = run.target;
    let limit = base.unbounded_limit;
    // admissible offsets (ascending) and the smallest inadmissible one
    let mut admissible: Vec<(f64, f64)> = vec![(0.0, max_value)];
    let mut above: Option<(f64, f64)> = None;
    let mut same_side = 0usize;
    let mut last_side = None;
    let mut x = base.initial_step;

    loop {
        let v = probe_or_finish!(run, x);
        if (v - target).abs() <= rvm.value_tol {
            if v < target {
                // slightly inadmissible but within tolerance
                run.best = (x, run.eval.profile_theta(x + run.theta_hat0), v);
            }
            return run.finish(EndpointStatus::Converged);
        }
        let side = v >= target;
        if side {
            admissible.push((x, v));
            admissible.sort_by(|a, b| a.0.total_cmp(&b.0));
        } else if above.is_none_or(|(h, _)| x < h) {
            above = Some((x, v));
        }
        same_side = if last_side == Some(side) { same_side + 1 } else { 0 };
        last_side = Some(side);

        let (lo, vlo) = *admissible.last().expect("contains the MLE");
        x = match above {
            None => {
                if lo >= limit {
                    return run.finish(EndpointStatus::Inestimable);
                }
                let k = admissible.len();
                let guess = if k >= 3 {
                    parabola([admissible[0], admissible[k - 2], admissible[k - 1]])
                        .and_then(|p| parabola_roots(p, target).into_iter().filter(|&r| r > lo).reduce(f64::min))
                } else {
                    None
                }
                .or_else(|| flat_start_root(max_value, lo, vlo, target).filter(|&r| r > lo));
                match guess {
                    Some(r) => r.min(limit),
                    None => (lo * 10.0).min(limit),
                }
            }
            Some((hi, vhi)) => {
                if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
                    return run.finish(EndpointStatus::Converged);
                }
                let guess = if lo > 0.0 {
                    parabola([(0.0, max_value), (lo, vlo), (hi, vhi)])
                        .and_then(|p| parabola_roots(p, target).into_iter().find(|&r| r > lo && r < hi))
                } else {
                    flat_start_root(max_value, hi, vhi, target).filter(|&r| r > lo && r < hi)
                };
                match guess {
                    // fall back to the midpoint when the interpolant misses the
                    // bracket or keeps landing on one side
                    Some(r) if same_side < 2 => r,
                    _ => 0.5 * (lo + hi),
                }
            }
        };
    }
}

impl ProfileEvaluator<'_> {
    fn profile_theta(&self, theta0: f64) -> DVector<f64> {
        let mut t = DVector::zeros(self.nuisance.len() + 1);
        t[0] = theta0;
        for (k, v) in self.nuisance.iter().enumerate() {
            t[k + 1] = *v;
        }
        t
    }
}

/// March θ0 in steps of `grid_step`, then halve the step around the
/// crossing until ℓ_PL is within `value_tol` of ℓ*.
pub fn grid_search_upper(model: &dyn LogLikelihood, theta_hat: &[f64], rvm: &RvmConfig, base: &BaselineConfig) -> EndpointResult {
    let Some(mut run) = Run::start(model, theta_hat, rvm, base) else {
        return failed_start(theta_hat);
    };
    run.budget = base.grid_budget;
    let target = run.target;
    let mut lo = 0.0;
    let mut step = base.grid_step;
    loop {
        let x = lo + step;
        match run.probe(x) {
            Probe::Value(v) if v >= target => lo = x,
            Probe::Value(v) => {
                if (v - target).abs() <= rvm.value_tol {
                    run.best = (x, run.eval.profile_theta(run.theta_hat0 + x), v);
                    return run.finish(EndpointStatus::Converged);
                }
                break;
            }
            Probe::Failed => return run.finish(EndpointStatus::Failed),
            Probe::Budget => {
                // one large step to test for an unbounded interval
                run.budget += 1;
                return match run.probe(lo + base.unbounded_limit) {
                    Probe::Value(v) if v >= target => run.finish(EndpointStatus::Inestimable),
                    Probe::Failed => run.finish(EndpointStatus::Failed),
                    _ => run.finish(EndpointStatus::IterationLimit),
                };
            }
        }
    }
    // refine between lo (admissible) and lo + step (not)
    loop {
        step *= 0.5;
        if step <= 1e-12 * (1.0 + lo.abs()) {
            return run.finish(EndpointStatus::Converged);
        }
        let x = lo + step;
        let v = probe_or_finish!(run, x);
        if (v - target).abs() <= rvm.value_tol {
            if v < target {
                run.best = (x, run.eval.profile_theta(run.theta_hat0 + x), v);
            }
            return run.finish(EndpointStatus::Converged);
        }
        if v >= target {
            lo = x;
        }
    }
}

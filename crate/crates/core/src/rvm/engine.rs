use nalgebra::DVector;

use super::accept::{accept_step, near_target, AcceptContext, Verdict};
use super::step::{propose_delta0, Delta0Action};
use super::{EndpointResult, EndpointStatus, RvmConfig, TraceRecord};
use crate::model::{LogLikelihood, Objective};
use crate::quadmodel::{
    is_negative_definite, is_negative_semidefinite, nuisance_optimum_with, profile_coefficients_with,
    solve_trust_subproblem, NuisanceInverse, ProfileQuadratic, QuadraticModel,
};
use crate::stats::likelihood_threshold;

/// A candidate step (δ0, δ̃) in the active coordinates.
struct Plan {
    delta0: f64,
    nuisance: DVector<f64>,
    unbounded: bool,
    /// δ0 was clamped to δ0_max; an admissible trial means inestimable.
    clamped: bool,
}

enum TrialOutcome {
    Accepted,
    Inestimable,
    /// A step no longer than ε was rejected.
    Tiny {
        delta0: f64,
        nuisance: DVector<f64>,
        verdict: Verdict,
        trial_gradient: Option<DVector<f64>>,
    },
    Exhausted,
}

enum Finish {
    Done(EndpointStatus),
    Continue,
}

struct Search<'o> {
    obj: Objective<'o>,
    cfg: RvmConfig,
    n: usize,
    theta: DVector<f64>,
    current: f64,
    gradient: Option<DVector<f64>>,
    max_value: f64,
    target0: f64,
    target: f64,
    maximizing: bool,
    grad_tol: f64,
    r_prev: Option<f64>,
    r0: f64,
    r1: f64,
    best: (DVector<f64>, f64),
    frozen: Vec<(usize, usize)>,
    hold_theta0: bool,
    iteration: usize,
    discontinuity: bool,
    trace: Vec<TraceRecord>,
}

pub(super) fn search(model: &dyn LogLikelihood, theta_hat: &[f64], cfg: &RvmConfig) -> EndpointResult {
    let mut obj = Objective::new(model, cfg.diff);
    let theta = DVector::from_column_slice(theta_hat);
    let max_value = obj.value(theta_hat);
    if !max_value.is_finite() {
        return EndpointResult::failed(theta, obj.counter());
    }
    let g_hat = match obj.gradient(theta_hat) {
        Ok(g) => g,
        Err(_) => return EndpointResult::failed(theta, obj.counter()),
    };
    let target0 = likelihood_threshold(max_value, cfg.confidence).expect("validated confidence");
    let search = Search {
        n: theta.len(),
        grad_tol: cfg.grad_tol_rel * (1.0 + g_hat.norm()),
        gradient: Some(g_hat),
        best: (theta.clone(), max_value),
        theta,
        current: max_value,
        max_value,
        target0,
        target: target0,
        maximizing: false,
        r_prev: None,
        r0: cfg.r0,
        r1: cfg.r1,
        frozen: Vec::new(),
        hold_theta0: false,
        iteration: 0,
        discontinuity: false,
        trace: Vec::new(),
        cfg: *cfg,
        obj,
    };
    search.run()
}

impl<'o> Search<'o> {
    fn run(mut self) -> EndpointResult {
        while self.iteration < self.cfg.iter_max {
            self.iteration += 1;
            match self.iterate() {
                Ok(Finish::Continue) => {}
                Ok(Finish::Done(status)) => return self.finish(status),
                Err(_) => return self.finish(EndpointStatus::Failed),
            }
        }
        // the last accepted step may have converged
        if let Ok(g) = self.current_gradient() {
            if self.is_converged(&g) {
                return self.finish(EndpointStatus::Converged);
            }
        }
        self.finish(EndpointStatus::IterationLimit)
    }

    fn finish(self, status: EndpointStatus) -> EndpointResult {
        let endpoint = match status {
            EndpointStatus::Inestimable => f64::INFINITY,
            _ => self.theta[0],
        };
        EndpointResult {
            endpoint,
            status,
            value: self.current,
            theta: self.theta,
            iterations: self.iteration,
            evals: self.obj.counter(),
            discontinuity: self.discontinuity,
            trace: self.trace,
        }
    }

    fn current_gradient(&mut self) -> crate::error::Result<DVector<f64>> {
        if let Some(g) = &self.gradient {
            return Ok(g.clone());
        }
        let g = self.obj.gradient(self.theta.as_slice())?;
        self.gradient = Some(g.clone());
        Ok(g)
    }

    fn nuisance_gradient_norm(g: &DVector<f64>) -> f64 {
        g.rows(1, g.len() - 1).norm()
    }

    fn is_converged(&self, g: &DVector<f64>) -> bool {
        (self.current - self.target0).abs() <= self.cfg.value_tol && Self::nuisance_gradient_norm(g) <= self.grad_tol
    }

    fn active_nuisance(&self) -> Vec<usize> {
        (1..self.n).filter(|j| !self.frozen.iter().any(|(f, _)| f == j)).collect()
    }

    fn release_frozen(&mut self) {
        for entry in &mut self.frozen {
            entry.1 = entry.1.saturating_sub(1);
        }
        self.frozen.retain(|(_, left)| *left > 0);
    }

    fn freeze(&mut self, index: usize) {
        if !self.frozen.iter().any(|(f, _)| *f == index) {
            self.frozen.push((index, self.cfg.freeze_iterations + 1));
        }
    }

    fn move_to(&mut self, theta: DVector<f64>, value: f64, gradient: Option<DVector<f64>>) {
        self.theta = theta;
        self.current = value;
        self.gradient = gradient;
        if value >= self.target0 && self.theta[0] > self.best.0[0] {
            self.best = (self.theta.clone(), value);
        }
    }

    fn full_step(&self, active: &[usize], delta0: f64, nuisance: &DVector<f64>) -> DVector<f64> {
        let mut step = DVector::zeros(self.n);
        step[0] = delta0;
        for (k, &j) in active.iter().enumerate() {
            step[j] = nuisance[k];
        }
        step
    }

    fn iterate(&mut self) -> crate::error::Result<Finish> {
        self.release_frozen();
        let g = self.current_gradient()?;
        if self.is_converged(&g) {
            return Ok(Finish::Done(EndpointStatus::Converged));
        }
        let h = self.obj.hessian(self.theta.as_slice())?;
        let active = self.active_nuisance();
        let qm = QuadraticModel::restricted(self.current, &g, &h, &active);
        let inverse = NuisanceInverse::compute(&qm, &self.cfg.singular);

        let mut pq = profile_coefficients_with(&qm, &inverse, self.target);
        if self.maximizing && (self.current < self.target0 || pq.a < 0.0) {
            self.maximizing = false;
            self.target = self.target0;
            pq = profile_coefficients_with(&qm, &inverse, self.target);
        }

        let bounded = if inverse.singular {
            let tol = self.cfg.singular.semidefinite_tolerance(&qm.h_nuisance);
            is_negative_semidefinite(&qm.h_nuisance, tol)
        } else {
            is_negative_definite(&qm.h_nuisance)
        };

        let hold = std::mem::take(&mut self.hold_theta0);
        let mut plan = None;
        if bounded {
            let delta0 = if hold {
                0.0
            } else {
                match self.choose_delta0(&qm, &inverse, &mut pq) {
                    Some(d) => d,
                    None => {
                        self.binary_recovery();
                        return Ok(Finish::Continue);
                    }
                }
            };
            let mut clamped = false;
            let delta0 = if delta0 >= self.cfg.delta0_max && self.current >= self.target0 {
                clamped = true;
                self.cfg.delta0_max
            } else {
                delta0
            };
            let sol = nuisance_optimum_with(&qm, &inverse, delta0);
            if sol.consistent {
                plan = Some(Plan {
                    delta0,
                    nuisance: sol.step,
                    unbounded: false,
                    clamped,
                });
            }
        }
        let plan = match plan {
            Some(p) => p,
            None => self.unbounded_plan(&qm, hold),
        };

        match self.try_steps(&qm, &active, &g, plan)? {
            TrialOutcome::Accepted => Ok(Finish::Continue),
            TrialOutcome::Inestimable => Ok(Finish::Done(EndpointStatus::Inestimable)),
            TrialOutcome::Exhausted => Ok(Finish::Done(EndpointStatus::Failed)),
            TrialOutcome::Tiny {
                delta0,
                nuisance,
                verdict,
                trial_gradient,
            } => self.handle_discontinuity(&qm, &active, &g, bounded, delta0, &nuisance, verdict, trial_gradient),
        }
    }

    /// δ0 from the approximate profile, or `None` if a binary recovery is
    /// needed. May raise the active target.
    fn choose_delta0(&mut self, qm: &QuadraticModel, inverse: &NuisanceInverse, pq: &mut ProfileQuadratic) -> Option<f64> {
        let mut proposal = propose_delta0(pq, self.cfg.delta0_max);
        if proposal.action == Delta0Action::ResetThreshold {
            // ℓ̂_PL(0) = q + ℓ*
            let profile_at_zero = pq.q + self.target;
            self.target = (profile_at_zero + 1.0).max(0.5 * (self.current + self.max_value));
            self.maximizing = true;
            *pq = profile_coefficients_with(qm, inverse, self.target);
            proposal = propose_delta0(pq, self.cfg.delta0_max);
            if proposal.action != Delta0Action::Step {
                proposal.delta0 = self.cfg.delta0_max;
            }
        }
        match proposal.action {
            Delta0Action::BinaryRecovery => None,
            _ => Some(proposal.delta0),
        }
    }

    fn trust_nuisance(&self, qm: &QuadraticModel, delta0: f64, radius: f64) -> DVector<f64> {
        let m = qm.nuisance_dim();
        if m == 0 || !(radius > 0.0) {
            return DVector::zeros(m);
        }
        solve_trust_subproblem(&qm.nuisance_linear_term(delta0), &qm.h_nuisance, radius).step
    }

    fn unbounded_plan(&self, qm: &QuadraticModel, hold: bool) -> Plan {
        let mut delta0 = if hold { 0.0 } else { self.r0.min(self.cfg.delta0_max) };
        let radius = self.r1;
        let mut nuisance = self.trust_nuisance(qm, delta0, radius);
        for _ in 0..60 {
            if qm.predict(delta0, &nuisance) > self.current || delta0 == 0.0 {
                break;
            }
            delta0 /= self.cfg.beta0;
            if delta0.abs() < 1e-300 {
                delta0 = 0.0;
            }
            nuisance = self.trust_nuisance(qm, delta0, radius);
        }
        Plan {
            delta0,
            nuisance,
            unbounded: true,
            clamped: false,
        }
    }

    fn try_steps(
        &mut self,
        qm: &QuadraticModel,
        active: &[usize],
        g: &DVector<f64>,
        plan: Plan,
    ) -> crate::error::Result<TrialOutcome> {
        let Plan {
            mut delta0,
            mut nuisance,
            unbounded,
            clamped,
        } = plan;
        let clamp_value = delta0;
        let eps = self.cfg.min_step_rel * (1.0 + g.norm());
        let ctx_base = AcceptContext {
            current: self.current,
            target: self.target,
            delta0,
            unbounded,
            gradient_norm: g.norm(),
            gamma: self.cfg.gamma,
            value_tol: self.cfg.value_tol,
            grad_tol: self.grad_tol,
        };
        let mut radius: Option<f64> = if unbounded { Some(self.r1) } else { None };

        for trial in 0..self.cfg.max_trials {
            let step = self.full_step(active, delta0, &nuisance);
            let step_norm = step.norm();
            let candidate = &self.theta + &step;
            let predicted = qm.predict(delta0, &nuisance);

            let mut trial_gradient = None;
            let (actual, verdict) = if candidate.iter().all(|v| v.is_finite()) {
                let actual = self.obj.value(candidate.as_slice());
                if clamped && delta0 == clamp_value && actual >= self.target0 {
                    self.push_trace(trial, delta0, nuisance.norm(), actual, true);
                    self.move_to(candidate, actual, None);
                    return Ok(TrialOutcome::Inestimable);
                }
                let ctx = AcceptContext { delta0, ..ctx_base };
                let verdict = match super::accept::value_rules(predicted, actual, &ctx) {
                    Some(true) => Verdict::Accept,
                    Some(false) => Verdict::RejectValue,
                    None if near_target(actual, &ctx) => {
                        let full = self.obj.gradient(candidate.as_slice())?;
                        let act = DVector::from_iterator(active.len(), active.iter().map(|&j| full[j]));
                        let pred = qm.predicted_nuisance_gradient(delta0, &nuisance);
                        trial_gradient = Some(full);
                        accept_step(predicted, actual, Some((&pred, &act)), &ctx)
                    }
                    None => Verdict::Accept,
                };
                (actual, verdict)
            } else {
                (f64::NEG_INFINITY, Verdict::RejectValue)
            };
            self.push_trace(trial, delta0, nuisance.norm(), actual, verdict.accepted());

            if verdict.accepted() {
                let accepted_radius = nuisance.norm();
                if accepted_radius > 0.0 {
                    self.r_prev = Some(accepted_radius);
                }
                if unbounded {
                    if delta0 != 0.0 {
                        self.r0 = (2.0 * delta0.abs()).min(self.cfg.delta0_max);
                    }
                    self.r1 = 2.0 * radius.unwrap_or(accepted_radius).max(accepted_radius);
                }
                self.move_to(candidate, actual, trial_gradient);
                return Ok(TrialOutcome::Accepted);
            }
            if step_norm <= eps {
                return Ok(TrialOutcome::Tiny {
                    delta0,
                    nuisance,
                    verdict,
                    trial_gradient,
                });
            }

            let rejected_radius = nuisance.norm();
            let next_radius = match (trial, radius, self.r_prev) {
                (0, None, Some(prev)) if prev < rejected_radius => (rejected_radius * prev).sqrt(),
                _ => {
                    delta0 /= self.cfg.beta0;
                    radius.unwrap_or(rejected_radius) / self.cfg.beta1
                }
            };
            radius = Some(next_radius);
            nuisance = self.trust_nuisance(qm, delta0, next_radius);
        }
        Ok(TrialOutcome::Exhausted)
    }

    fn push_trace(&mut self, trial: usize, delta0: f64, radius: f64, value: f64, accepted: bool) {
        if self.cfg.trace {
            self.trace.push(TraceRecord {
                iteration: self.iteration,
                trial,
                delta0,
                radius,
                current: self.current,
                value,
                accepted,
            });
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn handle_discontinuity(
        &mut self,
        qm: &QuadraticModel,
        active: &[usize],
        g: &DVector<f64>,
        bounded: bool,
        delta0: f64,
        nuisance: &DVector<f64>,
        verdict: Verdict,
        trial_gradient: Option<DVector<f64>>,
    ) -> crate::error::Result<Finish> {
        let step = self.full_step(active, delta0, nuisance);

        if verdict == Verdict::RejectGradient {
            // gradient discontinuity: hold the components that sit in a
            // local maximum and take the step
            if let Some(gt) = &trial_gradient {
                for &j in active {
                    if g[j] > 0.0 && gt[j] < 0.0 {
                        self.freeze(j);
                    }
                }
            }
            let candidate = &self.theta + &step;
            let value = self.obj.value(candidate.as_slice());
            self.move_to(candidate, value, trial_gradient);
            return Ok(Finish::Continue);
        }

        // decompose the step component by component
        let tol = self.cfg.gamma * (self.current - self.target).abs().max(self.cfg.value_tol);
        let mut partial = DVector::zeros(self.n);
        let mut culprits = Vec::new();
        let nuisance_of = |s: &DVector<f64>| DVector::from_iterator(active.len(), active.iter().map(|&j| s[j]));
        for j in std::iter::once(0).chain(active.iter().copied()) {
            if step[j] == 0.0 {
                continue;
            }
            let mut cand = partial.clone();
            cand[j] = step[j];
            let predicted = qm.predict(cand[0], &nuisance_of(&cand));
            let actual = self.obj.value((&self.theta + &cand).as_slice());
            if actual.is_finite() && (predicted - actual).abs() <= tol {
                partial = cand;
            } else {
                culprits.push(j);
            }
        }

        if culprits.contains(&0) {
            let nuisance_optimal = bounded && Self::nuisance_gradient_norm(g) <= self.grad_tol;
            if !nuisance_optimal {
                self.hold_theta0 = true;
                return Ok(Finish::Continue);
            }
            let mut far = self.theta.clone();
            far[0] += delta0;
            let far_value = self.obj.value(far.as_slice());
            if far_value >= self.target0 || self.current < far_value {
                self.move_to(far, far_value, None);
                return Ok(Finish::Continue);
            }
            if self.current >= self.target0 {
                self.discontinuity = true;
                return Ok(Finish::Done(EndpointStatus::Converged));
            }
            self.binary_recovery();
            return Ok(Finish::Continue);
        }

        if !culprits.is_empty() {
            let mut decreasing = Vec::new();
            for &j in &culprits {
                let mut cand = self.theta.clone();
                cand[j] += step[j];
                if self.obj.value(cand.as_slice()) < self.current {
                    decreasing.push(j);
                }
            }
            let hold = if decreasing.is_empty() { culprits } else { decreasing };
            for j in hold {
                self.freeze(j);
            }
            return Ok(Finish::Continue);
        }

        // every component is well predicted on its own: take the step
        let candidate = &self.theta + &step;
        let value = self.obj.value(candidate.as_slice());
        if value.is_finite() {
            self.move_to(candidate, value, None);
        }
        Ok(Finish::Continue)
    }

    /// Bisect between the current point and the best admissible point until
    /// an admissible point is found.
    fn binary_recovery(&mut self) {
        if self.current >= self.target0 {
            return;
        }
        let (best, best_value) = self.best.clone();
        let mut outside = self.theta.clone();
        for _ in 0..self.cfg.recovery_bisections {
            let mid = (&outside + &best) * 0.5;
            let value = self.obj.value(mid.as_slice());
            if value >= self.target0 {
                self.move_to(mid, value, None);
                return;
            }
            outside = mid;
        }
        self.move_to(best, best_value, None);
    }
}

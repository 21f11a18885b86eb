//! Trust-region acceptance test for a trial step.

use nalgebra::DVector;

/// Everything the acceptance cascade needs besides the two predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptContext {
    /// ℓ̄ at the expansion point.
    pub current: f64,
    /// Active target (possibly raised while maximizing).
    pub target: f64,
    pub delta0: f64,
    /// The quadratic model was unbounded in the nuisance block.
    pub unbounded: bool,
    /// Norm of the full gradient at the expansion point.
    pub gradient_norm: f64,
    pub gamma: f64,
    pub value_tol: f64,
    pub grad_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    /// Failed one of the value rules (2)–(4).
    RejectValue,
    /// Passed the value rules but the nuisance gradient is poorly predicted.
    RejectGradient,
}

impl Verdict {
    pub fn accepted(self) -> bool {
        self == Verdict::Accept
    }
}

/// The gradient rule only applies when ℓ is within this many `value_tol`
/// of the target.
pub const NEAR_TARGET_FACTOR: f64 = 10.0;

pub fn near_target(actual: f64, ctx: &AcceptContext) -> bool {
    (actual - ctx.target).abs() <= NEAR_TARGET_FACTOR * ctx.value_tol
}

/// Rules (1)–(4), which only need function values.
pub fn value_rules(predicted: f64, actual: f64, ctx: &AcceptContext) -> Option<bool> {
    if !actual.is_finite() || !predicted.is_finite() {
        return Some(false);
    }
    // (1) forward steps where the model was pessimistic
    if ctx.delta0 >= 0.0 && actual >= predicted {
        return Some(true);
    }
    // (2)
    if ctx.unbounded && actual < ctx.current {
        return Some(false);
    }
    let gap = (ctx.current - ctx.target).abs();
    // (3)
    if ctx.current < ctx.target && (actual - ctx.target).abs() >= gap {
        return Some(false);
    }
    // (4), with the gap floored at value_tol so a point sitting on the
    // target does not demand an exact model
    if (predicted - actual).abs() / gap.max(ctx.value_tol) > ctx.gamma {
        return Some(false);
    }
    None
}

/// Full acceptance cascade. `gradients` holds the predicted and actual
/// nuisance gradients at the trial point and is only consulted near the
/// target.
pub fn accept_step(
    predicted: f64,
    actual: f64,
    gradients: Option<(&DVector<f64>, &DVector<f64>)>,
    ctx: &AcceptContext,
) -> Verdict {
    match value_rules(predicted, actual, ctx) {
        Some(true) => return Verdict::Accept,
        Some(false) => return Verdict::RejectValue,
        None => {}
    }
    if near_target(actual, ctx) {
        if let Some((pred, act)) = gradients {
            let ratio = (pred - act).norm() / ctx.gradient_norm.max(ctx.grad_tol);
            if ratio > ctx.gamma {
                return Verdict::RejectGradient;
            }
        }
    }
    Verdict::Accept
}

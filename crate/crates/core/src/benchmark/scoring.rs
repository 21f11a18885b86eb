use serde::{Deserialize, Serialize};

use crate::rvm::{EndpointStatus, Side};

/// End points beyond this (transformed scale) count as unbounded.
pub const UNBOUNDED_LIMIT: f64 = 1000.0;
/// Shortfall below ℓ* still counted as admissible.
pub const ADMISSIBLE_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Truth {
    Finite(f64),
    Unbounded,
}

/// Widest admissible end point among `points`, or `None` if there are none.
/// `center` is θ̂ for the coordinate; a point 1000 or more from it, or
/// outside [−1000, 1000], makes the bound unbounded.
pub fn consensus_truth(side: Side, center: f64, points: &[f64]) -> Option<Truth> {
    let s = side.sign();
    let widest = points
        .iter()
        .copied()
        .filter(|p| !p.is_nan())
        .max_by(|a, b| (s * a).total_cmp(&(s * b)))?;
    if is_unbounded(side, center, widest) {
        Some(Truth::Unbounded)
    } else {
        Some(Truth::Finite(widest))
    }
}

fn is_unbounded(side: Side, center: f64, v: f64) -> bool {
    side.sign() * v > UNBOUNDED_LIMIT || side.sign() * (v - center) >= UNBOUNDED_LIMIT
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub success: bool,
    /// |endpoint − truth| on the scoring scale; NaN when the truth is
    /// unbounded.
    pub error: f64,
}

/// Success needs a reported convergence (or inestimability, when the truth
/// is unbounded) and an end point within 0.001 or 5% of the truth.
///
/// `endpoint` and `truth` are on the scoring scale; `center` and
/// `endpoint_transformed` are on the optimization scale and only used to
/// judge unbounded results.
pub fn score_run(
    status: EndpointStatus,
    side: Side,
    center: f64,
    endpoint_transformed: f64,
    endpoint: f64,
    truth: Truth,
) -> Score {
    match truth {
        Truth::Unbounded => {
            let reported = matches!(status, EndpointStatus::Converged | EndpointStatus::Inestimable);
            Score {
                success: reported && is_unbounded(side, center, endpoint_transformed),
                error: f64::NAN,
            }
        }
        Truth::Finite(t) => {
            let error = (endpoint - t).abs();
            let close = error <= 1e-3 || error <= 0.05 * t.abs();
            Score {
                success: status == EndpointStatus::Converged && close,
                error,
            }
        }
    }
}

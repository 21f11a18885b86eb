//! Choice of the step δ0 for the parameter of interest from the approximate
//! profile ℓ̂_PL(δ0) − ℓ* = aδ0² + pδ0 + q.

use crate::quadmodel::ProfileQuadratic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta0Action {
    /// Take the returned δ0.
    Step,
    /// The approximate profile grows without reaching ℓ*: raise the target.
    ResetThreshold,
    /// A local minimum sits above ℓ*: jump over it (δ0 = −p/a).
    JumpMinimum,
    /// The approximate profile is constant: try δ0_max.
    LargeProbe,
    /// At a local maximum below ℓ*: bisect back towards the best admissible point.
    BinaryRecovery,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta0Proposal {
    pub delta0: f64,
    pub action: Delta0Action,
}

impl Delta0Proposal {
    fn step(delta0: f64) -> Self {
        Self {
            delta0,
            action: Delta0Action::Step,
        }
    }
}

/// |p| ≤ 1e-10·(1+|a|+|q|).
pub fn slope_is_zero(pq: &ProfileQuadratic) -> bool {
    pq.p.abs() <= 1e-10 * (1.0 + pq.a.abs() + pq.q.abs())
}

fn curvature_is_zero(pq: &ProfileQuadratic) -> bool {
    pq.a.abs() <= 1e-10 * (1.0 + pq.p.abs() + pq.q.abs())
}

/// Real roots of aδ² + pδ + q, ascending, using the cancellation-free form.
/// A vanishing `a` gives the linear root.
pub fn real_roots(pq: &ProfileQuadratic) -> Vec<f64> {
    let ProfileQuadratic { a, p, q } = *pq;
    if curvature_is_zero(pq) {
        return if p != 0.0 { vec![-q / p] } else { Vec::new() };
    }
    let disc = p * p - 4.0 * a * q;
    if disc < 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    let t = -0.5 * (p + if p >= 0.0 { s } else { -s });
    let mut roots = if t == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![t / a, q / t]
    };
    roots.sort_by(f64::total_cmp);
    roots
}

fn smallest_positive(roots: &[f64]) -> Option<f64> {
    roots.iter().copied().filter(|&r| r > 0.0).reduce(f64::min)
}

fn smallest_magnitude(roots: &[f64]) -> Option<f64> {
    // ties go to the forward root
    roots
        .iter()
        .copied()
        .reduce(|best, r| if r.abs() < best.abs() || (r.abs() == best.abs() && r > best) { r } else { best })
}

/// Proposed δ0 and the action to take, following the case analysis on the
/// sign of the slope `p`, the curvature `a` and whether the approximate
/// profile at the current point lies above (`q ≥ 0`) or below the target.
pub fn propose_delta0(pq: &ProfileQuadratic, delta0_max: f64) -> Delta0Proposal {
    let ProfileQuadratic { a, p, q } = *pq;
    let flat_slope = slope_is_zero(pq);
    let flat_curve = curvature_is_zero(pq);

    if q >= 0.0 {
        if flat_slope && flat_curve {
            return Delta0Proposal {
                delta0: delta0_max,
                action: Delta0Action::LargeProbe,
            };
        }
        let decreasing = if flat_slope { a < 0.0 } else { p < 0.0 };
        if decreasing {
            let roots = real_roots(pq);
            if let Some(r) = smallest_positive(&roots) {
                return Delta0Proposal::step(r);
            }
            // local minimum above the target
            return Delta0Proposal {
                delta0: -p / a,
                action: Delta0Action::JumpMinimum,
            };
        }
        if a < 0.0 && !flat_curve {
            let s = (p * p - 4.0 * a * q).sqrt();
            return Delta0Proposal::step(-(p + s) / (2.0 * a));
        }
        return Delta0Proposal {
            delta0: 0.0,
            action: Delta0Action::ResetThreshold,
        };
    }

    // below the target: smallest step back to it
    let roots = real_roots(pq);
    if let Some(r) = smallest_magnitude(&roots) {
        return Delta0Proposal::step(r);
    }
    if flat_slope || flat_curve {
        return Delta0Proposal {
            delta0: 0.0,
            action: Delta0Action::BinaryRecovery,
        };
    }
    // local maximum below the target
    Delta0Proposal::step(-p / (2.0 * a))
}

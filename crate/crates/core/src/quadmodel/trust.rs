//! Trust-region subproblem: maximize gᵀx + ½xᵀHx subject to ‖x‖ ≤ r.
//!
//! Works in the eigenbasis of `H` (the systems here are small), so the
//! secular equation ‖x(μ)‖ = r is solved with a safeguarded Newton iteration
//! on 1/‖x(μ)‖ − 1/r, and the hard case is completed along the leading
//! eigenvector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone, PartialEq)]
pub struct TrustStep {
    pub step: DVector<f64>,
    /// Lagrange multiplier μ ≥ max(0, λ_max(H)) with (μI − H)x = g.
    pub multiplier: f64,
    pub on_boundary: bool,
    pub hard_case: bool,
}

/// Value of the quadratic objective gᵀx + ½xᵀHx.
pub fn quadratic_objective(g: &DVector<f64>, h: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    g.dot(x) + 0.5 * x.dot(&(h * x))
}

/// Global maximizer of gᵀx + ½xᵀHx over the ball ‖x‖ ≤ `radius`.
pub fn solve_trust_subproblem(g: &DVector<f64>, h: &DMatrix<f64>, radius: f64) -> TrustStep {
    let n = g.len();
    assert_eq!(h.nrows(), n);
    assert!(radius > 0.0, "trust radius must be positive");
    if n == 0 {
        return TrustStep {
            step: DVector::zeros(0),
            multiplier: 0.0,
            on_boundary: false,
            hard_case: false,
        };
    }

    let eig = SymmetricEigen::new(h.clone());
    let lambda = &eig.eigenvalues;
    let q = &eig.eigenvectors;
    let coeffs = q.transpose() * g;
    let g_norm = g.norm();
    let scale = lambda.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let (lead, lambda_max) = lambda
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });

    let in_eigenbasis = |mu: f64, skip_leading: bool| -> DVector<f64> {
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let denom = mu - lambda[i];
            if skip_leading && (lambda_max - lambda[i]).abs() <= 1e-12 * scale {
                continue;
            }
            if denom > 0.0 {
                y[i] = coeffs[i] / denom;
            }
        }
        y
    };

    // Interior Newton point.
    if lambda_max < -1e-14 * scale {
        let y = in_eigenbasis(0.0, false);
        if y.norm() <= radius {
            return TrustStep {
                step: q * y,
                multiplier: 0.0,
                on_boundary: false,
                hard_case: false,
            };
        }
    }

    let mu_low = lambda_max.max(0.0);

    // Hard case: g has no component along the leading eigenspace and the
    // remaining components cannot reach the boundary.
    let leading_weight: f64 = (0..n)
        .filter(|&i| (lambda_max - lambda[i]).abs() <= 1e-12 * scale)
        .map(|i| coeffs[i] * coeffs[i])
        .sum::<f64>()
        .sqrt();
    if lambda_max >= -1e-14 * scale && leading_weight <= 1e-12 * g_norm.max(1e-300) {
        let y = in_eigenbasis(mu_low, true);
        let y_norm = y.norm();
        if y_norm <= radius {
            let tau = (radius * radius - y_norm * y_norm).max(0.0).sqrt();
            let mut step = q * y;
            let v = q.column(lead).into_owned();
            // pick the sign that does not lower the objective
            let sign = if g.dot(&v) + step.dot(&(h * &v)) >= 0.0 { 1.0 } else { -1.0 };
            step += v * (sign * tau);
            return TrustStep {
                step,
                multiplier: mu_low,
                on_boundary: true,
                hard_case: true,
            };
        }
    }

    // Regular case: ‖x(μ)‖ = r for a unique μ > mu_low.
    let norm_at = |mu: f64| -> (f64, f64) {
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for i in 0..n {
            let d = mu - lambda[i];
            let c2 = coeffs[i] * coeffs[i];
            s2 += c2 / (d * d);
            s3 += c2 / (d * d * d);
        }
        (s2.sqrt(), s3)
    };
    let mut lo = mu_low;
    let mut hi = mu_low + g_norm / radius + 1e-300;
    // ensure the upper bracket really gives a short enough step
    while norm_at(hi).0 > radius {
        hi = mu_low + 2.0 * (hi - mu_low);
    }
    let mut mu = hi;
    for _ in 0..200 {
        let (norm, s3) = norm_at(mu);
        if (norm - radius).abs() <= 1e-13 * radius {
            break;
        }
        if norm > radius {
            lo = mu;
        } else {
            hi = mu;
        }
        // φ(μ) = 1/‖x‖ − 1/r, φ'(μ) = s3 / ‖x‖³
        let phi = 1.0 / norm - 1.0 / radius;
        let dphi = s3 / (norm * norm * norm);
        let mut next = mu - phi / dphi;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
        mu = next;
    }
    let y = in_eigenbasis(mu, false);
    let mut step = q * y;
    // tiny rescale so the constraint is met to rounding
    let norm = step.norm();
    if norm > radius {
        step *= radius / norm;
    }
    TrustStep {
        step,
        multiplier: mu,
        on_boundary: true,
        hard_case: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_grid_max_2d(g: &DVector<f64>, h: &DMatrix<f64>, r: f64, steps: usize) -> f64 {
        let mut best = 0.0_f64;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = DVector::from_vec(vec![
                    -r + 2.0 * r * i as f64 / steps as f64,
                    -r + 2.0 * r * j as f64 / steps as f64,
                ]);
                if x.norm() <= r {
                    best = best.max(quadratic_objective(g, h, &x));
                }
            }
        }
        // boundary circle, finely
        for k in 0..(8 * steps) {
            let t = 2.0 * std::f64::consts::PI * k as f64 / (8 * steps) as f64;
            let x = DVector::from_vec(vec![r * t.cos(), r * t.sin()]);
            best = best.max(quadratic_objective(g, h, &x));
        }
        best
    }

    #[test]
    fn boundary_solution_for_concave_model() {
        let h = -DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![3.0, 4.0]);
        let s = solve_trust_subproblem(&g, &h, 1.0);
        assert!((s.step[0] - 0.6).abs() < 1e-10 && (s.step[1] - 0.8).abs() < 1e-10);
        assert!(s.on_boundary);
    }

    #[test]
    fn interior_newton_point() {
        let h = -DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![0.3, 0.4]);
        let s = solve_trust_subproblem(&g, &h, 1.0);
        assert!((s.step[0] - 0.3).abs() < 1e-12 && (s.step[1] - 0.4).abs() < 1e-12);
        assert!(!s.on_boundary);
    }

    #[test]
    fn indefinite_model_matches_grid() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let g = DVector::from_vec(vec![0.0, 1.0]);
        let s = solve_trust_subproblem(&g, &h, 1.0);
        let oracle = dense_grid_max_2d(&g, &h, 1.0, 400);
        let value = quadratic_objective(&g, &h, &s.step);
        assert!((value - oracle).abs() < 1e-3, "{value} vs {oracle}");
        assert!(s.step.norm() <= 1.0 + 1e-10);
    }

    #[test]
    fn one_dimensional_convex() {
        let h = DMatrix::from_element(1, 1, 1.0);
        let g = DVector::from_element(1, 1.0);
        let s = solve_trust_subproblem(&g, &h, 1.0);
        assert!((s.step[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_hard_case() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let g = DVector::zeros(2);
        let s = solve_trust_subproblem(&g, &h, 1.0);
        assert!(s.hard_case);
        assert!((s.step[0].abs() - 1.0).abs() < 1e-12 && s.step[1].abs() < 1e-12);
        let oracle = dense_grid_max_2d(&g, &h, 1.0, 200);
        assert!((quadratic_objective(&g, &h, &s.step) - oracle).abs() < 1e-3);
    }

    #[test]
    fn stationarity_on_boundary() {
        let h = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, -2.0]);
        let g = DVector::from_vec(vec![0.7, -0.1]);
        let s = solve_trust_subproblem(&g, &h, 0.8);
        let residual = (DMatrix::identity(2, 2) * s.multiplier - &h) * &s.step - &g;
        assert!(residual.norm() < 1e-8);
        assert!((s.step.norm() - 0.8).abs() < 1e-10);
    }
}

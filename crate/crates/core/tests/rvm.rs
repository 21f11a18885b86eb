use nalgebra::{DMatrix, DVector};
use plci::model::{GaussianLogLikelihood, LogLikelihood, ValueOnly};
use plci::rvm::{find_endpoint, find_lower_endpoint, find_upper_endpoint, EndpointStatus, RvmConfig, Side};
use plci::stats::chi2_1_quantile;

const Z975: f64 = 1.959_963_984_540_054;

fn threshold_drop() -> f64 {
    0.5 * chi2_1_quantile(0.95).unwrap()
}

/// ℓ depends on θ1 only.
struct FlatInFirst;

impl LogLikelihood for FlatInFirst {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, t: &[f64]) -> f64 {
        -0.5 * t[1] * t[1]
    }
    fn gradient(&self, t: &[f64]) -> Option<DVector<f64>> {
        Some(DVector::from_vec(vec![0.0, -t[1]]))
    }
    fn hessian(&self, _: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]))
    }
}

/// ℓ = −floor(θ0) with zero derivatives.
struct Staircase;

impl LogLikelihood for Staircase {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, t: &[f64]) -> f64 {
        -t[0].floor()
    }
    fn gradient(&self, _: &[f64]) -> Option<DVector<f64>> {
        Some(DVector::zeros(1))
    }
    fn hessian(&self, _: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(1, 1))
    }
}

/// Poisson-type profile in θ0 with a curved nuisance ridge, so the interval
/// is asymmetric.
struct Skewed;

impl LogLikelihood for Skewed {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, t: &[f64]) -> f64 {
        let r = t[1] - 0.3 * t[0] * t[0];
        3.0 * t[0] - 3.0 * t[0].exp() - 0.5 * r * r
    }
}

#[test]
fn standard_quadratic_upper_and_lower() {
    let m = GaussianLogLikelihood::standard(2);
    let cfg = RvmConfig::default();
    let up = find_upper_endpoint(&m, &[0.0, 0.0], &cfg).unwrap();
    assert_eq!(up.status, EndpointStatus::Converged);
    assert!((up.endpoint - Z975).abs() < 1e-8, "{}", up.endpoint);
    assert!(up.iterations <= 2);
    let low = find_lower_endpoint(&m, &[0.0, 0.0], &cfg).unwrap();
    assert_eq!(low.status, EndpointStatus::Converged);
    assert!((low.endpoint + Z975).abs() < 1e-8);
}

#[test]
fn correlated_quadratic_closed_form() {
    let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 0.5]);
    let mean = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let m = GaussianLogLikelihood::from_covariance(mean.clone(), &cov).unwrap();
    let cfg = RvmConfig::default();
    for index in 0..3 {
        let half = (2.0 * threshold_drop() * cov[(index, index)]).sqrt();
        let up = find_endpoint(&m, mean.as_slice(), index, Side::Upper, &cfg).unwrap();
        let low = find_endpoint(&m, mean.as_slice(), index, Side::Lower, &cfg).unwrap();
        assert!(up.converged() && low.converged());
        assert!((up.endpoint - (mean[index] + half)).abs() < 1e-8);
        assert!((low.endpoint - (mean[index] - half)).abs() < 1e-8);
    }
}

#[test]
fn numeric_derivatives_still_hit_quadratic_endpoint() {
    let m = ValueOnly(GaussianLogLikelihood::standard(3));
    let up = find_upper_endpoint(&m, &[0.0; 3], &RvmConfig::default()).unwrap();
    assert!(up.converged());
    assert!((up.endpoint - Z975).abs() < 1e-4);
}

#[test]
fn flat_profile_is_inestimable() {
    let cfg = RvmConfig::default();
    let up = find_upper_endpoint(&FlatInFirst, &[0.0, 0.0], &cfg).unwrap();
    assert_eq!(up.status, EndpointStatus::Inestimable);
    assert_eq!(up.endpoint, f64::INFINITY);
    let low = find_lower_endpoint(&FlatInFirst, &[0.0, 0.0], &cfg).unwrap();
    assert_eq!(low.status, EndpointStatus::Inestimable);
    assert_eq!(low.endpoint, f64::NEG_INFINITY);
}

#[test]
fn staircase_stops_at_last_admissible_tread() {
    // ℓ(θ̂) = 0 at θ̂ = 0.5; ℓ* ≈ −1.92 so treads with floor ≤ 1 are admissible
    let cfg = RvmConfig::default();
    let r = find_upper_endpoint(&Staircase, &[0.5], &cfg).unwrap();
    assert_eq!(r.status, EndpointStatus::Converged, "{r:?}");
    assert!(r.discontinuity);
    assert!((r.endpoint - 2.0).abs() <= cfg.value_tol, "{}", r.endpoint);
    assert!(r.value >= 0.5 - threshold_drop() - 0.5);
}

#[test]
fn skewed_model_orders_endpoints() {
    let cfg = RvmConfig::default();
    // maximum at θ0 = ln 1 = 0, θ1 = 0
    let theta_hat = [0.0, 0.0];
    let up = find_upper_endpoint(&Skewed, &theta_hat, &cfg).unwrap();
    let low = find_lower_endpoint(&Skewed, &theta_hat, &cfg).unwrap();
    assert!(up.converged() && low.converged(), "{:?} {:?}", up.status, low.status);
    assert!(low.endpoint < 0.0 && 0.0 < up.endpoint);
    // profile is 3θ0 − 3e^θ0 (nuisance maximized exactly); solve for the roots by bisection
    let profile = |x: f64| 3.0 * x - 3.0 * x.exp() + 3.0 + threshold_drop();
    let root = |mut a: f64, mut b: f64| {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if profile(a) * profile(m) <= 0.0 {
                b = m
            } else {
                a = m
            }
        }
        0.5 * (a + b)
    };
    assert!((up.endpoint - root(0.0, 5.0)).abs() < 1e-3);
    assert!((low.endpoint - root(-10.0, 0.0)).abs() < 1e-3);
    for r in [&up, &low] {
        assert!((r.value - (-3.0 - threshold_drop())).abs() <= cfg.value_tol);
    }
}

/// Same as `Skewed` but θ0 enters with its sign flipped.
struct FlippedSkewed;

impl LogLikelihood for FlippedSkewed {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, t: &[f64]) -> f64 {
        Skewed.value(&[-t[0], t[1]])
    }
}

#[test]
fn lower_search_is_flipped_upper_search() {
    let cfg = RvmConfig::default();
    let low = find_lower_endpoint(&Skewed, &[0.0, 0.0], &cfg).unwrap();
    let flipped = find_upper_endpoint(&FlippedSkewed, &[0.0, 0.0], &cfg).unwrap();
    assert_eq!(low.endpoint.to_bits(), (-flipped.endpoint).to_bits());
    assert_eq!(low.evals, flipped.evals);
}

#[test]
fn trace_records_steps() {
    let cfg = RvmConfig {
        trace: true,
        ..RvmConfig::default()
    };
    let r = find_upper_endpoint(&Skewed, &[0.0, 0.0], &cfg).unwrap();
    assert!(!r.trace.is_empty());
    assert!(r.trace.iter().any(|t| t.accepted));
    let line = r.trace[0].to_string();
    assert!(line.starts_with("iter=1 trial=0"));
}

#[test]
fn non_finite_start_fails() {
    struct Nan;
    impl LogLikelihood for Nan {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, _: &[f64]) -> f64 {
            f64::NAN
        }
    }
    let r = find_upper_endpoint(&Nan, &[0.0], &RvmConfig::default()).unwrap();
    assert_eq!(r.status, EndpointStatus::Failed);
    assert!(find_upper_endpoint(&Nan, &[0.0, 1.0], &RvmConfig::default()).is_err());
}

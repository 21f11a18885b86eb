use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn check_level(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("confidence level must be in (0, 1), got {confidence}")))
    }
}

/// Two-sided standard normal quantile z with P(|Z| ≤ z) = `confidence`.
pub fn normal_quantile_two_sided(confidence: f64) -> Result<f64> {
    check_level(confidence)?;
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + 0.5 * confidence))
}

/// Quantile of the χ² distribution with one degree of freedom. Computed as
/// the square of the two-sided normal quantile, which is exact for one
/// degree of freedom and more accurate than a generic gamma inversion.
pub fn chi2_1_quantile(confidence: f64) -> Result<f64> {
    let z = normal_quantile_two_sided(confidence)?;
    Ok(z * z)
}

/// ℓ* = ℓ(θ̂) − ½χ²₁(confidence).
pub fn likelihood_threshold(max_log_likelihood: f64, confidence: f64) -> Result<f64> {
    Ok(max_log_likelihood - 0.5 * chi2_1_quantile(confidence)?)
}

/// ln(1 + eˣ) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`]: ln(eʸ − 1) for y > 0.
pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// 1 / (1 + e⁻ˣ).
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quantiles() {
        let z = normal_quantile_two_sided(0.95).unwrap();
        assert!((z - 1.959_963_984_540_054).abs() < 1e-12);
        let c = chi2_1_quantile(0.95).unwrap();
        assert!((c - 3.841_458_820_694_124).abs() < 1e-10);
        assert!(chi2_1_quantile(1.0).is_err());
        assert!(chi2_1_quantile(0.0).is_err());
    }

    #[test]
    fn softplus_round_trip() {
        for &a in &[0.01, 0.1, 0.5, 1.0, 2.0, 7.0, 20.0] {
            let back = softplus(softplus_inverse(a));
            assert!((back - a).abs() <= 1e-12 * a.max(1.0), "{a} -> {back}");
        }
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(softplus(800.0), 800.0);
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(-10.0) - 4.539_786_870_243_44e-5).abs() < 1e-15);
        assert_eq!(logistic(-1000.0), 0.0);
        assert_eq!(logistic(1000.0), 1.0);
    }
}

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{Dataset, Family};
use crate::model::LogLikelihood;
use crate::stats::{logistic, softplus};

/// ℓ(θ) = Σᵢ [xᵢηᵢ − ln(1 + e^ηᵢ)] with ηᵢ = β₀ + Σⱼ βⱼ cᵢⱼ^αⱼ.
///
/// Rows with identical covariates are merged: each distinct covariate row
/// contributes sₓη − m·ln(1 + e^η), where m counts the rows and sₓ sums
/// their responses.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// Σx per pattern.
    responses: Vec<f64>,
    /// Rows per pattern.
    weights: Vec<f64>,
    /// ln c, row-major by pattern.
    log_c: Vec<f64>,
    /// c, used when the powers are fixed.
    c: Vec<f64>,
    k: usize,
    free_powers: bool,
}

impl LogisticModel {
    pub fn new(data: &Dataset, free_powers: bool) -> Self {
        let (n, k) = data.covariates.shape();
        let mut patterns: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
        for i in 0..n {
            let key = (0..k).map(|j| data.covariates[(i, j)].to_bits()).collect();
            let e = patterns.entry(key).or_insert((0.0, 0.0));
            e.0 += data.responses[i];
            e.1 += 1.0;
        }
        let mut c = Vec::with_capacity(patterns.len() * k);
        let mut responses = Vec::with_capacity(patterns.len());
        let mut weights = Vec::with_capacity(patterns.len());
        for (key, (sx, m)) in patterns {
            c.extend(key.into_iter().map(f64::from_bits));
            responses.push(sx);
            weights.push(m);
        }
        Self {
            responses,
            weights,
            log_c: c.iter().map(|v| v.ln()).collect(),
            c,
            k,
            free_powers,
        }
    }

    /// Distinct covariate rows.
    pub fn patterns(&self) -> usize {
        self.weights.len()
    }

    pub fn for_family(data: &Dataset, family: Family) -> Self {
        Self::new(data, family.free_powers())
    }

    pub fn covariates(&self) -> usize {
        self.k
    }

    fn split<'t>(&self, theta: &'t [f64]) -> (&'t [f64], &'t [f64]) {
        if self.free_powers {
            theta.split_at(self.k)
        } else {
            (&[], theta)
        }
    }

    /// η and the powered covariates for row i.
    fn eta(&self, i: usize, alpha: &[f64], beta: &[f64], pow: &mut [f64]) -> f64 {
        let base = i * self.k;
        let mut eta = beta[0];
        for j in 0..self.k {
            pow[j] = if self.free_powers {
                (alpha[j] * self.log_c[base + j]).exp()
            } else {
                self.c[base + j]
            };
            eta += beta[j + 1] * pow[j];
        }
        eta
    }

    fn powers(&self, alpha_t: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let alpha = alpha_t.iter().map(|&a| softplus(a)).collect();
        let dalpha = alpha_t.iter().map(|&a| logistic(a)).collect();
        (alpha, dalpha)
    }
}

impl LogLikelihood for LogisticModel {
    fn dim(&self) -> usize {
        if self.free_powers {
            2 * self.k + 1
        } else {
            self.k + 1
        }
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let (alpha_t, beta) = self.split(theta);
        let (alpha, _) = self.powers(alpha_t);
        let mut pow = vec![0.0; self.k];
        let mut total = 0.0;
        for (i, &x) in self.responses.iter().enumerate() {
            let eta = self.eta(i, &alpha, beta, &mut pow);
            total += x * eta - self.weights[i] * softplus(eta);
        }
        total
    }

    fn gradient(&self, theta: &[f64]) -> Option<DVector<f64>> {
        let (alpha_t, beta) = self.split(theta);
        let (alpha, dalpha) = self.powers(alpha_t);
        let k = self.k;
        let off = if self.free_powers { k } else { 0 };
        let mut g = DVector::zeros(theta.len());
        let mut pow = vec![0.0; k];
        for (i, &x) in self.responses.iter().enumerate() {
            let eta = self.eta(i, &alpha, beta, &mut pow);
            let r = x - self.weights[i] * logistic(eta);
            g[off] += r;
            for j in 0..k {
                g[off + 1 + j] += r * pow[j];
                if self.free_powers {
                    g[j] += r * beta[j + 1] * pow[j] * self.log_c[i * k + j] * dalpha[j];
                }
            }
        }
        Some(g)
    }

    fn hessian(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        let (alpha_t, beta) = self.split(theta);
        let (alpha, dalpha) = self.powers(alpha_t);
        let k = self.k;
        let n = theta.len();
        let off = if self.free_powers { k } else { 0 };
        let mut h = DMatrix::zeros(n, n);
        let mut d = vec![0.0; n];
        let mut pow = vec![0.0; k];
        for (i, &x) in self.responses.iter().enumerate() {
            let eta = self.eta(i, &alpha, beta, &mut pow);
            let p = logistic(eta);
            let m = self.weights[i];
            let r = x - m * p;
            let w = m * p * (1.0 - p);
            let log_c = &self.log_c[i * k..(i + 1) * k];
            // ∂η/∂θ
            d[off] = 1.0;
            for j in 0..k {
                d[off + 1 + j] = pow[j];
                if self.free_powers {
                    d[j] = beta[j + 1] * pow[j] * log_c[j] * dalpha[j];
                }
            }
            for a in 0..n {
                let wa = w * d[a];
                for b in a..n {
                    h[(a, b)] -= wa * d[b];
                }
            }
            // r ∂²η/∂θ∂θᵀ
            if self.free_powers {
                for j in 0..k {
                    let (lc, pw, s) = (log_c[j], pow[j], dalpha[j]);
                    let ds = s * (1.0 - s);
                    h[(j, j)] += r * beta[j + 1] * pw * lc * (lc * s * s + ds);
                    h[(j, off + 1 + j)] += r * pw * lc * s;
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        Some(h)
    }
}

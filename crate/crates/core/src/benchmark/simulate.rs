use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use super::{BenchmarkSpec, TrueParameters};
use crate::error::Result;
use crate::stats::logistic;

/// Covariates (N × k, perturbed counts) and binary responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariates: DMatrix<f64>,
    pub responses: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// CSV with header `x,c1,...,ck`.
    pub fn to_csv(&self) -> String {
        let k = self.covariates.ncols();
        let mut out = String::from("x");
        for j in 1..=k {
            write!(out, ",c{j}").unwrap();
        }
        out.push('\n');
        for (i, x) in self.responses.iter().enumerate() {
            write!(out, "{x}").unwrap();
            for j in 0..k {
                write!(out, ",{}", self.covariates[(i, j)]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `rep` of a run seeded with `seed`.
pub fn replicate_seed(seed: u64, rep: u64) -> u64 {
    splitmix64(seed.wrapping_add(rep))
}

/// Odd columns (1-based) are negative binomial, each even column is
/// Binomial(previous count, binom_p). All counts are then perturbed.
pub fn simulate_covariates<R: Rng + ?Sized>(spec: &BenchmarkSpec, rng: &mut R) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let k = spec.family.covariates();
    let (r, p) = spec.negative_binomial();
    let gamma = Gamma::new(r, (1.0 - p) / p).expect("positive shape and scale");
    let mut counts = DMatrix::<f64>::zeros(spec.n, k);
    for i in 0..spec.n {
        for j in 0..k {
            counts[(i, j)] = if j % 2 == 0 {
                let lambda: f64 = gamma.sample(rng);
                if lambda > 0.0 {
                    Poisson::new(lambda).expect("positive rate").sample(rng)
                } else {
                    0.0
                }
            } else {
                let trials = counts[(i, j - 1)] as u64;
                Binomial::new(trials, spec.binom_p).expect("valid probability").sample(rng) as f64
            };
        }
    }
    counts.add_scalar_mut(spec.zero_perturbation);
    Ok(counts)
}

/// Bernoulli draws with Pr(x = 1) = logistic(β₀ + Σ βⱼ cⱼ^αⱼ).
pub fn simulate_responses<R: Rng + ?Sized>(covariates: &DMatrix<f64>, params: &TrueParameters, rng: &mut R) -> Vec<f64> {
    (0..covariates.nrows())
        .map(|i| {
            let eta = params.beta[0]
                + (0..covariates.ncols())
                    .map(|j| params.beta[j + 1] * covariates[(i, j)].powf(params.alpha[j]))
                    .sum::<f64>();
            if rng.random::<f64>() < logistic(eta) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// The data set for one replicate.
pub fn simulate(spec: &BenchmarkSpec, rep: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(spec.seed, rep));
    let covariates = simulate_covariates(spec, &mut rng)?;
    let responses = simulate_responses(&covariates, &spec.family.truth(), &mut rng);
    Ok(Dataset { covariates, responses })
}

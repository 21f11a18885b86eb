//! The local quadratic model of the log-likelihood around an iterate, split
//! into the parameter of interest (coordinate 0) and the nuisance block.

mod trust;

pub use trust::{quadratic_objective, solve_trust_subproblem, TrustStep};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::Objective;

/// Second-order Taylor expansion at an iterate:
/// ℓ̂(δ0, δ̃) = ℓ̄ + g0 δ0 + g̃ᵀδ̃ + ½H00 δ0² + δ0 H̃0ᵀδ̃ + ½δ̃ᵀH̃δ̃.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub value: f64,
    pub g0: f64,
    pub g_nuisance: DVector<f64>,
    pub h00: f64,
    pub h0_nuisance: DVector<f64>,
    pub h_nuisance: DMatrix<f64>,
}

impl QuadraticModel {
    /// Split full derivatives by the first coordinate.
    pub fn from_derivatives(value: f64, gradient: &DVector<f64>, hessian: &DMatrix<f64>) -> Self {
        let nuisance: Vec<usize> = (1..gradient.len()).collect();
        Self::restricted(value, gradient, hessian, &nuisance)
    }

    /// Like [`from_derivatives`](Self::from_derivatives) but keeping only the
    /// listed nuisance coordinates (indices into the full vector, all > 0).
    pub fn restricted(
        value: f64,
        gradient: &DVector<f64>,
        hessian: &DMatrix<f64>,
        nuisance: &[usize],
    ) -> Self {
        let m = nuisance.len();
        let g_nuisance = DVector::from_iterator(m, nuisance.iter().map(|&j| gradient[j]));
        let h0_nuisance = DVector::from_iterator(m, nuisance.iter().map(|&j| hessian[(j, 0)]));
        let h_nuisance = DMatrix::from_fn(m, m, |a, b| hessian[(nuisance[a], nuisance[b])]);
        Self {
            value,
            g0: gradient[0],
            g_nuisance,
            h00: hessian[(0, 0)],
            h0_nuisance,
            h_nuisance,
        }
    }

    pub fn nuisance_dim(&self) -> usize {
        self.g_nuisance.len()
    }

    /// ℓ̂ at the step (δ0, δ̃).
    pub fn predict(&self, delta0: f64, nuisance: &DVector<f64>) -> f64 {
        self.value
            + self.g0 * delta0
            + 0.5 * self.h00 * delta0 * delta0
            + self.g_nuisance.dot(nuisance)
            + delta0 * self.h0_nuisance.dot(nuisance)
            + 0.5 * nuisance.dot(&(&self.h_nuisance * nuisance))
    }

    /// ∂ℓ̂/∂δ̃ at the step (δ0, δ̃).
    pub fn predicted_nuisance_gradient(&self, delta0: f64, nuisance: &DVector<f64>) -> DVector<f64> {
        &self.g_nuisance + &self.h0_nuisance * delta0 + &self.h_nuisance * nuisance
    }

    /// Linear term of the nuisance subproblem at fixed δ0: g̃ + H̃0 δ0.
    pub fn nuisance_linear_term(&self, delta0: f64) -> DVector<f64> {
        &self.g_nuisance + &self.h0_nuisance * delta0
    }
}

/// ℓ, g and H at θ, split into a [`QuadraticModel`].
pub fn build_quadratic(objective: &mut Objective<'_>, theta: &[f64]) -> Result<QuadraticModel> {
    let value = objective.value(theta);
    let g = objective.gradient(theta)?;
    let h = objective.hessian(theta)?;
    Ok(QuadraticModel::from_derivatives(value, &g, &h))
}

/// Coefficients of the approximate profile: ℓ̂_PL(δ0) − ℓ* = aδ0² + pδ0 + q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileQuadratic {
    pub a: f64,
    pub p: f64,
    pub q: f64,
}

impl ProfileQuadratic {
    pub fn eval(&self, delta0: f64) -> f64 {
        (self.a * delta0 + self.p) * delta0 + self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SingularVariant {
    MoorePenrose,
    #[default]
    HoldDependent,
}

/// How the engine treats a singular nuisance Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SingularPolicy {
    pub variant: SingularVariant,
    /// Singular values below `svd_rank_rtol · σ_max` count as zero.
    pub svd_rank_rtol: f64,
    /// Eigenvalues up to `eig_semidef_tol · max|Mᵢⱼ|` count as non-positive.
    pub eig_semidef_tol: f64,
}

impl Default for SingularPolicy {
    fn default() -> Self {
        Self {
            variant: SingularVariant::HoldDependent,
            svd_rank_rtol: 1e-10,
            eig_semidef_tol: 1e-8,
        }
    }
}

impl SingularPolicy {
    pub fn moore_penrose() -> Self {
        Self {
            variant: SingularVariant::MoorePenrose,
            ..Self::default()
        }
    }

    pub fn hold_dependent() -> Self {
        Self::default()
    }

    pub fn semidefinite_tolerance(&self, m: &DMatrix<f64>) -> f64 {
        self.eig_semidef_tol * m.amax()
    }
}

fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    SVD::new(m.clone(), false, false).singular_values
}

fn numeric_rank(m: &DMatrix<f64>, threshold: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > threshold).count()
}

/// Indices of nuisance rows that do not raise the numeric rank when the rows
/// of `h` are stacked in descending order of |g|. Ties keep ascending index
/// order. Returned sorted ascending.
pub fn detect_dependent_rows(h: &DMatrix<f64>, g: &DVector<f64>, policy: &SingularPolicy) -> Vec<usize> {
    let n = h.nrows();
    if n == 0 {
        return Vec::new();
    }
    let sigma_max = singular_values(h).max();
    if sigma_max <= 0.0 {
        return (0..n).collect();
    }
    let threshold = policy.svd_rank_rtol * sigma_max;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| g[j].abs().total_cmp(&g[i].abs()).then(i.cmp(&j)));

    let mut kept: Vec<usize> = Vec::with_capacity(n);
    let mut dependent = Vec::new();
    let mut rank = 0;
    for &row in &order {
        let mut rows = kept.clone();
        rows.push(row);
        let stacked = DMatrix::from_fn(rows.len(), n, |a, b| h[(rows[a], b)]);
        let r = numeric_rank(&stacked, threshold);
        if r > rank {
            rank = r;
            kept.push(row);
        } else {
            dependent.push(row);
        }
    }
    dependent.sort_unstable();
    dependent
}

/// The nuisance system with the dependent set `S` separated out.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    /// Free ("f") coordinates, held at zero step.
    pub free: Vec<usize>,
    /// Remaining ("d") coordinates.
    pub kept: Vec<usize>,
    pub h_dd: DMatrix<f64>,
    pub h_df: DMatrix<f64>,
    pub h_ff: DMatrix<f64>,
    pub g_d: DVector<f64>,
    pub g_f: DVector<f64>,
    pub h0_d: DVector<f64>,
    pub h0_f: DVector<f64>,
}

impl ReducedSystem {
    pub fn new(qm: &QuadraticModel, free: &[usize]) -> Self {
        let n = qm.nuisance_dim();
        let kept: Vec<usize> = (0..n).filter(|i| !free.contains(i)).collect();
        let sub = |rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |a, b| qm.h_nuisance[(rows[a], cols[b])])
        };
        let pick = |v: &DVector<f64>, idx: &[usize]| DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]));
        Self {
            free: free.to_vec(),
            h_dd: sub(&kept, &kept),
            h_df: sub(&kept, free),
            h_ff: sub(free, free),
            g_d: pick(&qm.g_nuisance, &kept),
            g_f: pick(&qm.g_nuisance, free),
            h0_d: pick(&qm.h0_nuisance, &kept),
            h0_f: pick(&qm.h0_nuisance, free),
            kept,
        }
    }
}

/// A generalized inverse of the nuisance Hessian H̃ under a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceInverse {
    pub matrix: DMatrix<f64>,
    pub singular: bool,
    /// Dependent set `S` (empty unless singular under HoldDependent).
    pub dependent: Vec<usize>,
}

impl NuisanceInverse {
    pub fn compute(qm: &QuadraticModel, policy: &SingularPolicy) -> Self {
        let h = &qm.h_nuisance;
        let n = h.nrows();
        if n == 0 {
            return Self {
                matrix: DMatrix::zeros(0, 0),
                singular: false,
                dependent: Vec::new(),
            };
        }
        let sigma = singular_values(h);
        let sigma_max = sigma.max();
        let threshold = policy.svd_rank_rtol * sigma_max;
        let rank = if sigma_max > 0.0 {
            sigma.iter().filter(|&&s| s > threshold).count()
        } else {
            0
        };
        if rank == n {
            if let Some(inv) = exact_inverse(h) {
                return Self {
                    matrix: inv,
                    singular: false,
                    dependent: Vec::new(),
                };
            }
        }
        match policy.variant {
            SingularVariant::MoorePenrose => {
                let matrix = if sigma_max > 0.0 {
                    SVD::new(h.clone(), true, true)
                        .pseudo_inverse(threshold)
                        .unwrap_or_else(|_| DMatrix::zeros(n, n))
                } else {
                    DMatrix::zeros(n, n)
                };
                Self {
                    matrix,
                    singular: true,
                    dependent: Vec::new(),
                }
            }
            SingularVariant::HoldDependent => {
                let dependent = detect_dependent_rows(h, &qm.g_nuisance, policy);
                let reduced = ReducedSystem::new(qm, &dependent);
                let mut matrix = DMatrix::zeros(n, n);
                if !reduced.kept.is_empty() {
                    let inv = exact_inverse(&reduced.h_dd).unwrap_or_else(|| {
                        SVD::new(reduced.h_dd.clone(), true, true)
                            .pseudo_inverse(threshold)
                            .unwrap_or_else(|_| DMatrix::zeros(reduced.kept.len(), reduced.kept.len()))
                    });
                    for (a, &i) in reduced.kept.iter().enumerate() {
                        for (b, &j) in reduced.kept.iter().enumerate() {
                            matrix[(i, j)] = inv[(a, b)];
                        }
                    }
                }
                Self {
                    matrix,
                    singular: true,
                    dependent,
                }
            }
        }
    }
}

fn exact_inverse(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let neg = -h.clone();
    if let Some(chol) = Cholesky::new(neg) {
        return Some(-chol.inverse());
    }
    h.clone().lu().try_inverse()
}

/// Tolerance for the consistency test 0 ≈ H̃δ̃* + H̃0δ0 + g̃.
pub fn consistency_tolerance(qm: &QuadraticModel, delta0: f64) -> f64 {
    1e-6 * (1.0 + qm.g_nuisance.norm() + delta0.abs() * qm.h0_nuisance.norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceSolution {
    pub step: DVector<f64>,
    pub consistent: bool,
    pub residual: f64,
}

/// δ̃* = −H̃⁻(H̃0δ0 + g̃) with a precomputed generalized inverse.
pub fn nuisance_optimum_with(qm: &QuadraticModel, inverse: &NuisanceInverse, delta0: f64) -> NuisanceSolution {
    let rhs = qm.nuisance_linear_term(delta0);
    let step = -(&inverse.matrix * &rhs);
    let residual = (&qm.h_nuisance * &step + &rhs).norm();
    let consistent = !inverse.singular || residual <= consistency_tolerance(qm, delta0);
    NuisanceSolution {
        step,
        consistent,
        residual,
    }
}

/// Maximizer of ℓ̂ over the nuisance block at fixed δ0.
pub fn nuisance_optimum(qm: &QuadraticModel, delta0: f64, policy: &SingularPolicy) -> NuisanceSolution {
    let inverse = NuisanceInverse::compute(qm, policy);
    nuisance_optimum_with(qm, &inverse, delta0)
}

pub fn profile_coefficients_with(qm: &QuadraticModel, inverse: &NuisanceInverse, target: f64) -> ProfileQuadratic {
    let hg = &inverse.matrix * &qm.h0_nuisance;
    let a = 0.5 * (qm.h00 - qm.h0_nuisance.dot(&hg));
    let p = qm.g0 - qm.g_nuisance.dot(&hg);
    let q = qm.value - 0.5 * qm.g_nuisance.dot(&(&inverse.matrix * &qm.g_nuisance)) - target;
    ProfileQuadratic { a, p, q }
}

/// (a, p, q) of the approximate profile relative to `target` (ℓ*).
pub fn profile_coefficients(qm: &QuadraticModel, target: f64, policy: &SingularPolicy) -> ProfileQuadratic {
    let inverse = NuisanceInverse::compute(qm, policy);
    profile_coefficients_with(qm, &inverse, target)
}

/// True iff a Cholesky factorization of −M exists. The empty matrix counts
/// as negative definite.
pub fn is_negative_definite(m: &DMatrix<f64>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    Cholesky::new(-m.clone()).is_some()
}

/// True iff the largest eigenvalue of the symmetric matrix M is ≤ `tol`.
pub fn is_negative_semidefinite(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.max() <= tol
}

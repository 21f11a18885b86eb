//! Profile likelihood confidence intervals.
//!
//! The core search ([`rvm`]) finds the end points of
//! {θ0 : max over the nuisance parameters of ℓ(θ) ≥ ℓ*} with a trust-region
//! Newton iteration that copes with singular Hessians, unbounded local
//! models, inestimable parameters and discontinuities. [`baselines`] holds
//! the methods it is compared against and [`benchmark`] the simulated
//! logistic-regression study used for the comparison.

// `!(x > y)` is used on purpose so that NaN takes the failure branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod benchmark;
pub mod error;
pub mod function_ci;
pub mod model;
pub mod quadmodel;
pub mod rvm;
pub mod stats;

pub use error::{Error, Result};
pub use model::{DiffConfig, EvalCounter, LogLikelihood, Objective, ParameterVector};
pub use quadmodel::{SingularPolicy, SingularVariant};
pub use rvm::{find_endpoint, find_interval, find_lower_endpoint, find_upper_endpoint, EndpointResult, EndpointStatus, RvmConfig, Side};

//! Semiparametric Bayesian inference for the mean response `E[Y]` when a
//! binary outcome `Y` is missing at random given covariates `Z in [0,1]^d`.
//!
//! An observation is `(Z, R, R*Y)` with `R` the response indicator. The model
//! is parameterized by the inverse propensity score `a(z) = 1/P(R=1|Z=z)`,
//! the regression `b(z) = P(Y=1|Z=z)` and the covariate distribution `F`,
//! and the estimand is `chi = E[Y] = int b dF`.
//!
//! The crate provides
//!
//! - the likelihood, efficient influence function and efficient (semiparametric)
//!   variance of `chi` ([`model`]),
//! - dyadic grid functions, Haar/Daubechies-4 wavelet bases, quadrature and
//!   seeded synthesis of Holder-smooth test functions ([`funcspace`]),
//! - Gaussian seed-vector priors on the logit regression: truncated wavelet
//!   series, Riemann-Liouville, and the propensity-score-dependent correction
//!   `W + lambda*a_hat` ([`priors`]),
//! - pilot estimators of the inverse propensity score ([`pilot`]),
//! - an elliptical slice sampler for the regression posterior combined with
//!   Dirichlet-process / Bayesian-bootstrap draws of `F` ([`sampler`]),
//! - diagnostics that measure how close the posterior of
//!   `sqrt(n)*(chi - chi_hat)` is to its Gaussian limit: centering, credible
//!   intervals, KS/Wasserstein distances and coverage experiments
//!   ([`diagnostics`]).
//!
//! Everything is deterministic given the seeds carried by the configuration
//! structs; replications and chains derive private RNG streams from
//! `(master seed, replication id, chain id)`.

pub mod diagnostics;
pub mod dgp;
pub mod error;
pub mod funcspace;
pub mod math;
pub mod model;
pub mod pilot;
pub mod priors;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use funcspace::{Evaluable, GridFunction, Points};

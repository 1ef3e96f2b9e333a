//! Priors on the logit regression `eta^b`, each expressed as a deterministic
//! linear map from a finite standard-Gaussian seed vector `theta ~ N(0, I)`
//! to a function on `[0,1]^d`, so a single sampler serves every prior.
//!
//! - [`SeriesPriorSpec`]: truncated wavelet series
//!   `W_z = sum_{j<=J} sum_k sigma_j theta_{jk} psi_{jk}(z)` with
//!   `sigma_j = 2^{-j(r + d/2)}` and `2^J` the smallest dyadic at least
//!   `n^{1/(2 betabar + d)}`.
//! - [`RlPriorSpec`]: Riemann-Liouville process released at zero,
//!   `sum_{k <= floor(betabar)+1} g_k z^k + int_0^z (z-s)^{betabar-1/2} dB_s`,
//!   with the stochastic integral discretized by a left-point Riemann sum.
//! - [`PropensityDependentSpec`]: an inner map plus the correction
//!   `sigma_lambda * theta_last * a_hat(z)`, i.e. a mean-zero Gaussian field
//!   with covariance `K_inner(z,z') + sigma^2 a_hat(z) a_hat(z')`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::funcspace::{Evaluable, GridFunction, Points, WaveletBasis, WaveletFamily};
use crate::math::ksum;

/// Dense row-major design matrix mapping seeds to function values.
#[derive(Debug, Clone)]
pub struct Design {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.cols {
            return Err(Error::SeedLength {
                expected: self.cols,
                got: theta.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_into(theta, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn matvec_into(&self, theta: &[f64], out: &mut [f64]) {
        debug_assert_eq!(theta.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(theta).map(|(a, t)| a * t).sum();
        }
    }

    /// Prior covariance of the mapped values at rows `i` and `j`
    /// (`theta ~ N(0, I)` makes it the row inner product).
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum()
    }
}

/// Truncated Gaussian wavelet series prior.
#[derive(Debug, Clone)]
pub struct SeriesPriorSpec {
    /// Prior smoothness `betabar > 0` driving the truncation level.
    pub betabar: f64,
    /// Scaling exponent `r >= 0` in `sigma_j = 2^{-j(r + d/2)}`.
    pub scale_exp: f64,
    /// Sample size driving the truncation.
    pub n: usize,
    pub dim: usize,
    pub family: WaveletFamily,
}

impl SeriesPriorSpec {
    pub fn new(betabar: f64, scale_exp: f64, n: usize, dim: usize) -> Self {
        Self {
            betabar,
            scale_exp,
            n,
            dim,
            family: WaveletFamily::Haar,
        }
    }

    /// Smallest `J >= 1` with `2^J >= n^{1/(2 betabar + d)}`.
    pub fn truncation_level(&self) -> u32 {
        let target = (self.n as f64).powf(1.0 / (2.0 * self.betabar + self.dim as f64));
        let mut j = 1u32;
        while ((1u64 << j) as f64) < target * (1.0 - 1e-12) {
            j += 1;
        }
        j
    }

    /// `sigma_j = 2^{-j(r + d/2)}`.
    pub fn sigma(&self, j: u32) -> f64 {
        2.0f64.powf(-(j as f64) * (self.scale_exp + self.dim as f64 / 2.0))
    }

    pub fn basis(&self) -> Result<WaveletBasis> {
        let j = self.truncation_level();
        match self.family {
            WaveletFamily::Haar => Ok(WaveletBasis::haar(self.dim, j)),
            WaveletFamily::Daubechies4 => WaveletBasis::new(self.family, self.dim, j),
        }
    }

    pub fn seed_dim(&self) -> usize {
        let j = self.truncation_level();
        (1..=j).map(|l| 1usize << (l as usize * self.dim)).sum()
    }
}

/// Riemann-Liouville prior (one-dimensional covariates only).
#[derive(Debug, Clone)]
pub struct RlPriorSpec {
    pub betabar: f64,
    /// The stochastic integral is discretized on `2^grid_level` intervals.
    pub grid_level: u32,
}

impl RlPriorSpec {
    pub fn new(betabar: f64, grid_level: u32) -> Self {
        Self {
            betabar,
            grid_level,
        }
    }

    /// Number of polynomial release terms `z^k`, `k = 0..=floor(betabar)+1`.
    pub fn poly_terms(&self) -> usize {
        self.betabar.floor() as usize + 2
    }

    pub fn increments(&self) -> usize {
        1usize << self.grid_level
    }

    pub fn seed_dim(&self) -> usize {
        self.poly_terms() + self.increments()
    }
}

/// Inner prior shifted along a pilot estimate of the inverse propensity
/// score; the last seed coordinate is `lambda / sigma_lambda`.
#[derive(Clone)]
pub struct PropensityDependentSpec {
    pub inner: Box<SeedMap>,
    pub a_hat: Arc<dyn Evaluable + Send + Sync>,
    pub sigma_lambda: f64,
}

impl std::fmt::Debug for PropensityDependentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PropensityDependentSpec")
            .field("inner", &self.inner)
            .field("sigma_lambda", &self.sigma_lambda)
            .finish()
    }
}

/// A deterministic map from a finite Gaussian seed vector to `eta^b` values;
/// linear in the seed for every kind, with `eval(0, .) = 0`.
#[derive(Debug, Clone)]
pub enum SeedMap {
    Series(SeriesPriorSpec),
    RiemannLiouville(RlPriorSpec),
    PropensityDependent(PropensityDependentSpec),
}

impl SeedMap {
    pub fn seed_dim(&self) -> usize {
        match self {
            SeedMap::Series(s) => s.seed_dim(),
            SeedMap::RiemannLiouville(s) => s.seed_dim(),
            SeedMap::PropensityDependent(s) => s.inner.seed_dim() + 1,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SeedMap::Series(s) => s.dim,
            SeedMap::RiemannLiouville(_) => 1,
            SeedMap::PropensityDependent(s) => s.inner.dim(),
        }
    }

    /// The prior standard deviation `sigma_lambda` when the map carries a
    /// propensity correction.
    pub fn sigma_lambda(&self) -> Option<f64> {
        match self {
            SeedMap::PropensityDependent(s) => Some(s.sigma_lambda),
            _ => None,
        }
    }

    /// `lambda = sigma_lambda * theta_last` for the propensity-dependent map.
    pub fn lambda_of(&self, theta: &[f64]) -> Option<f64> {
        match self {
            SeedMap::PropensityDependent(s) => {
                theta.last().map(|&t| s.sigma_lambda * t)
            }
            _ => None,
        }
    }

    /// Builds the design matrix `D` with `eval(theta) = D theta` at `pts`.
    pub fn design(&self, pts: &Points) -> Result<Design> {
        if pts.dim() != self.dim() {
            return Err(Error::Config(format!(
                "points dim {} vs prior dim {}",
                pts.dim(),
                self.dim()
            )));
        }
        match self {
            SeedMap::Series(spec) => {
                let basis = spec.basis()?;
                let j_max = spec.truncation_level();
                let cols = spec.seed_dim();
                let mut data = Vec::with_capacity(pts.len() * cols);
                for z in pts.iter() {
                    for j in 1..=j_max {
                        let sigma = spec.sigma(j);
                        for k in 0..basis.level_count(j) {
                            data.push(sigma * basis.evaluate_unchecked(j, k, z));
                        }
                    }
                }
                Ok(Design {
                    rows: pts.len(),
                    cols,
                    data,
                })
            }
            SeedMap::RiemannLiouville(spec) => {
                let p = spec.poly_terms();
                let m = spec.increments();
                let cols = p + m;
                let dt = 1.0 / m as f64;
                let sqrt_dt = dt.sqrt();
                let expo = spec.betabar - 0.5;
                let mut data = Vec::with_capacity(pts.len() * cols);
                for zp in pts.iter() {
                    let z = zp[0];
                    let mut zk = 1.0;
                    for _ in 0..p {
                        data.push(zk);
                        zk *= z;
                    }
                    for i in 0..m {
                        let s = i as f64 * dt;
                        let coeff = if s + dt <= z {
                            // full cell, left-point kernel value
                            (z - s).powf(expo) * sqrt_dt
                        } else if s < z {
                            // partial cell at the upper limit: exact kernel
                            // integral, which also absorbs the singularity
                            // for betabar < 1/2
                            (z - s).powf(expo + 1.0) / (expo + 1.0) / sqrt_dt
                        } else {
                            0.0
                        };
                        data.push(coeff);
                    }
                }
                Ok(Design {
                    rows: pts.len(),
                    cols,
                    data,
                })
            }
            SeedMap::PropensityDependent(spec) => {
                let inner = spec.inner.design(pts)?;
                let cols = inner.cols + 1;
                let mut data = Vec::with_capacity(pts.len() * cols);
                for (i, z) in pts.iter().enumerate() {
                    data.extend_from_slice(inner.row(i));
                    data.push(spec.sigma_lambda * spec.a_hat.value(z));
                }
                Ok(Design {
                    rows: pts.len(),
                    cols,
                    data,
                })
            }
        }
    }

    /// Evaluates the map at `pts` for one seed vector.
    pub fn eval(&self, theta: &[f64], pts: &Points) -> Result<Vec<f64>> {
        self.design(pts)?.matvec(theta)
    }
}

/// Exponentiates an `eta^f` draw on the dyadic grid and normalizes it into a
/// density: `f = exp(W) / int exp(W)`. The maximum is subtracted before
/// exponentiation, and the output integrates to one exactly under the
/// midpoint rule.
pub fn exp_density_map(inner: &SeedMap, theta: &[f64], grid_level: u32) -> Result<GridFunction> {
    let grid = GridFunction::constant(grid_level, inner.dim(), 0.0);
    let centers = grid.centers();
    let w = inner.eval(theta, &centers)?;
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut values: Vec<f64> = w.iter().map(|v| (v - max).exp()).collect();
    let total = ksum(values.iter().copied()) / values.len() as f64;
    for v in &mut values {
        *v /= total;
    }
    GridFunction::new(grid_level, inner.dim(), values)
}

/// RKHS norm of the Gaussian series prior for a function given by its
/// wavelet coefficients in the seed layout:
/// `||w||^2 = sum_j sum_k sigma_j^{-2} c_{jk}^2`.
pub fn rkhs_norm_series(spec: &SeriesPriorSpec, coeffs: &[f64]) -> Result<f64> {
    let dim = spec.seed_dim();
    if coeffs.len() > dim {
        return Err(Error::SeedLength {
            expected: dim,
            got: coeffs.len(),
        });
    }
    let j_max = spec.truncation_level();
    let mut idx = 0usize;
    let mut total = 0.0;
    for j in 1..=j_max {
        let sigma = spec.sigma(j);
        for _ in 0..(1usize << (j as usize * spec.dim)) {
            if idx >= coeffs.len() {
                break;
            }
            let c = coeffs[idx] / sigma;
            total += c * c;
            idx += 1;
        }
    }
    Ok(total.sqrt())
}

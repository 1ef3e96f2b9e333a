//! The binary missing-at-random model.
//!
//! An observation is `(Z, R, R*Y)` with `Z in [0,1]^d` and `R, Y in {0,1}`,
//! parameterized by the inverse propensity score `a(z) = 1/P(R=1|Z=z)`, the
//! regression `b(z) = P(Y=1|Z=z)` and the covariate distribution `F`. The
//! estimand is the mean response `chi = int b dF`. This module holds the
//! likelihood (which factorizes into `a`, `b` and `F` parts), the efficient
//! influence function, the efficient asymptotic variance, and the AIPW
//! estimator used for centering.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::funcspace::{quadrature, Evaluable, GridFunction, Points};
use crate::math::KahanSum;

/// Probabilities are clipped to this margin before logs, so float underflow
/// never produces infinities.
pub const PROB_CLIP: f64 = 1e-12;

/// Logistic link `psi(x) = 1 / (1 + exp(-x))`.
#[inline]
pub fn psi(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse link (logit). Requires `p` strictly inside `(0,1)`.
pub fn psi_inv(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p == 0.0 || p == 1.0 {
        return Err(Error::Domain(format!("psi_inv needs p in (0,1), got {p}")));
    }
    Ok((p / (1.0 - p)).ln())
}

/// One record `(z, r, r*y)`. `ry` can only be set when `r` is.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub z: &'a [f64],
    pub r: bool,
    pub ry: bool,
}

/// An i.i.d. sample stored column-wise.
#[derive(Debug, Clone)]
pub struct Dataset {
    pts: Points,
    r: Vec<bool>,
    ry: Vec<bool>,
}

impl Dataset {
    pub fn new(pts: Points, r: Vec<bool>, ry: Vec<bool>) -> Result<Self> {
        if r.len() != pts.len() || ry.len() != pts.len() {
            return Err(Error::Config("indicator lengths must match points".into()));
        }
        if r.iter().zip(&ry).any(|(&ri, &ryi)| ryi && !ri) {
            return Err(Error::Domain("ry = 1 requires r = 1".into()));
        }
        Ok(Self { pts, r, ry })
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.pts.dim()
    }

    pub fn points(&self) -> &Points {
        &self.pts
    }

    pub fn obs(&self, i: usize) -> Observation<'_> {
        Observation {
            z: self.pts.point(i),
            r: self.r[i],
            ry: self.ry[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Observation<'_>> {
        (0..self.len()).map(move |i| self.obs(i))
    }

    /// Number of observations with `r = 1`.
    pub fn num_observed(&self) -> usize {
        self.r.iter().filter(|&&r| r).count()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut pts = Points::new(self.dim(), Vec::new()).expect("dim valid");
        let mut r = Vec::with_capacity(idx.len());
        let mut ry = Vec::with_capacity(idx.len());
        for &i in idx {
            pts.push(self.pts.point(i));
            r.push(self.r[i]);
            ry.push(self.ry[i]);
        }
        Dataset { pts, r, ry }
    }

    /// Concatenates this dataset with itself `copies` times.
    pub fn repeated(&self, copies: usize) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).cycle().take(self.len() * copies).collect();
        self.subset(&idx)
    }
}

/// The covariate distribution handle: a density on the grid, the uniform
/// distribution, or a discrete distribution (empirical or a Dirichlet draw).
#[derive(Debug, Clone)]
pub enum CovariateDist {
    Uniform { dim: usize },
    Density(GridFunction),
    Discrete { pts: Points, weights: Vec<f64> },
}

impl CovariateDist {
    pub fn dim(&self) -> usize {
        match self {
            CovariateDist::Uniform { dim } => *dim,
            CovariateDist::Density(f) => f.dim(),
            CovariateDist::Discrete { pts, .. } => pts.dim(),
        }
    }

    /// Empirical distribution of a point set.
    pub fn empirical(pts: Points) -> Self {
        let n = pts.len();
        CovariateDist::Discrete {
            pts,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// `int g dF`, by midpoint quadrature for densities and by weighted sum
    /// for discrete distributions.
    pub fn expect(&self, g: &dyn Evaluable) -> Result<f64> {
        match self {
            CovariateDist::Uniform { dim } => {
                let level = if *dim == 1 { 14 } else { 7 };
                let grid = GridFunction::from_fn(level, *dim, |z| g.value(z));
                quadrature(&grid, None)
            }
            CovariateDist::Density(f) => {
                let grid = GridFunction::from_fn(f.level(), f.dim(), |z| g.value(z));
                quadrature(&grid, Some(f))
            }
            CovariateDist::Discrete { pts, weights } => {
                let mut acc = KahanSum::new();
                for (z, &w) in pts.iter().zip(weights) {
                    acc.add(w * g.value(z));
                }
                Ok(acc.value())
            }
        }
    }

    /// Draws `n` i.i.d. points. Densities sample a cell from the cumulative
    /// cell masses and then uniformly within the cell; discrete
    /// distributions sample their atoms by weight.
    pub fn draw_points(&self, n: usize, rng: &mut impl rand::Rng) -> Points {
        let dim = self.dim();
        let mut out = Points::new(dim, Vec::with_capacity(n * dim)).expect("dim valid");
        match self {
            CovariateDist::Uniform { .. } => {
                let mut z = [0.0; 2];
                for _ in 0..n {
                    for x in z.iter_mut().take(dim) {
                        *x = rng.random();
                    }
                    out.push(&z[..dim]);
                }
            }
            CovariateDist::Density(f) => {
                let m = f.num_cells() as f64;
                let mut acc = 0.0;
                let cdf: Vec<f64> = f
                    .values()
                    .iter()
                    .map(|v| {
                        acc += v / m;
                        acc
                    })
                    .collect();
                let h = 1.0 / (1u64 << f.level()) as f64;
                for _ in 0..n {
                    let u: f64 = rng.random();
                    let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
                    let center = f.center(idx);
                    let mut z = [0.0; 2];
                    for (x, c) in z.iter_mut().zip(&center) {
                        *x = (c + h * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
                    }
                    out.push(&z[..dim]);
                }
            }
            CovariateDist::Discrete { pts, weights } => {
                let mut acc = 0.0;
                let cdf: Vec<f64> = weights
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect();
                for _ in 0..n {
                    let u: f64 = rng.random::<f64>() * acc;
                    let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
                    out.push(pts.point(idx));
                }
            }
        }
        out
    }

    /// `int g dF` at a caller-chosen grid level (densities and uniform only).
    pub fn expect_at_level(&self, g: &dyn Evaluable, level: u32) -> Result<f64> {
        match self {
            CovariateDist::Uniform { dim } => {
                let grid = GridFunction::from_fn(level, *dim, |z| g.value(z));
                quadrature(&grid, None)
            }
            CovariateDist::Density(f) => {
                if level == f.level() {
                    return self.expect(g);
                }
                // resample the density piecewise-constantly at the new level
                let w = GridFunction::from_fn(level, f.dim(), |z| f.value(z));
                let grid = GridFunction::from_fn(level, f.dim(), |z| g.value(z));
                quadrature(&grid, Some(&w))
            }
            CovariateDist::Discrete { .. } => self.expect(g),
        }
    }
}

/// The model parameters `(a, b, F)`.
#[derive(Clone)]
pub struct ParamTriple {
    pub a: Arc<dyn Evaluable + Send + Sync>,
    pub b: Arc<dyn Evaluable + Send + Sync>,
    pub dist: CovariateDist,
}

impl ParamTriple {
    /// Checks the boundedness margins on a dyadic grid: `1/a` and `b` inside
    /// `(margin, 1 - margin)`, and the density (when present) inside
    /// `(margin_f, 1/margin_f)`.
    pub fn validate(&self, margin: f64, margin_f: f64, level: u32) -> Result<()> {
        let dim = self.dist.dim();
        let probe = GridFunction::constant(level, dim, 0.0);
        for idx in 0..probe.num_cells() {
            let z = probe.center(idx);
            let pa = 1.0 / self.a.value(&z);
            if !(pa > margin && pa < 1.0 - margin) {
                return Err(Error::Domain(format!(
                    "1/a = {pa} at z = {z:?} violates margin {margin}"
                )));
            }
            let b = self.b.value(&z);
            if !(b > margin && b < 1.0 - margin) {
                return Err(Error::Domain(format!(
                    "b = {b} at z = {z:?} violates margin {margin}"
                )));
            }
            if let CovariateDist::Density(f) = &self.dist {
                let fv = f.value(&z);
                if !(fv > margin_f && fv < 1.0 / margin_f) {
                    return Err(Error::Domain(format!(
                        "f = {fv} at z = {z:?} violates density margin {margin_f}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Log-likelihood of a dataset, exposed with its three additive components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikParts {
    pub a_part: f64,
    pub b_part: f64,
    pub f_part: Option<f64>,
}

impl LogLikParts {
    pub fn total(&self) -> f64 {
        self.a_part + self.b_part + self.f_part.unwrap_or(0.0)
    }
}

fn checked_log(p: f64, what: &str) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("{what} = {p} outside (0,1)")));
    }
    Ok(p.clamp(PROB_CLIP, 1.0 - PROB_CLIP).ln())
}

/// `sum_i [ r_i log(1/a) + (1-r_i) log(1 - 1/a) + r_i y_i log b
///          + r_i (1-y_i) log(1-b) ]`, plus `sum_i log f(z_i)` when
/// `include_density` is set. The three parts accumulate separately with
/// compensated summation.
pub fn log_likelihood(
    data: &Dataset,
    params: &ParamTriple,
    include_density: bool,
) -> Result<LogLikParts> {
    let mut la = KahanSum::new();
    let mut lb = KahanSum::new();
    let mut lf = KahanSum::new();
    let density = if include_density {
        match &params.dist {
            CovariateDist::Density(f) => Some(f),
            CovariateDist::Uniform { .. } => None, // log 1 = 0
            CovariateDist::Discrete { .. } => {
                return Err(Error::Domain(
                    "density part requested but F is discrete".into(),
                ))
            }
        }
    } else {
        None
    };
    for o in data.iter() {
        let pa = 1.0 / params.a.value(o.z);
        if o.r {
            la.add(checked_log(pa, "1/a")?);
            let b = params.b.value(o.z);
            if o.ry {
                lb.add(checked_log(b, "b")?);
            } else {
                lb.add(checked_log(1.0 - b, "1-b")?);
            }
        } else {
            la.add(checked_log(1.0 - pa, "1-1/a")?);
        }
        if include_density {
            if let Some(f) = density {
                let fv = f.value(o.z);
                if fv <= 0.0 || !fv.is_finite() {
                    return Err(Error::Domain(format!("f = {fv} not positive")));
                }
                lf.add(fv.ln());
            }
        }
    }
    Ok(LogLikParts {
        a_part: la.value(),
        b_part: lb.value(),
        f_part: include_density.then(|| lf.value()),
    })
}

/// The mean response `chi = int b dF`. With `tol`, densities are also
/// integrated one level coarser and the difference must stay below `tol`.
pub fn chi_functional(
    b: &dyn Evaluable,
    dist: &CovariateDist,
    tol: Option<f64>,
) -> Result<f64> {
    let value = dist.expect(b)?;
    if let Some(tol) = tol {
        let coarse = match dist {
            CovariateDist::Density(f) if f.level() > 0 => {
                Some(dist.expect_at_level(b, f.level() - 1)?)
            }
            CovariateDist::Uniform { dim } => {
                let level = if *dim == 1 { 14 } else { 7 };
                Some(dist.expect_at_level(b, level - 1)?)
            }
            _ => None,
        };
        if let Some(coarse) = coarse {
            if (value - coarse).abs() > tol {
                return Err(Error::Quadrature(format!(
                    "level refinement moved the integral by {} > tol {tol}",
                    (value - coarse).abs()
                )));
            }
        }
    }
    Ok(value)
}

/// Efficient influence function `r a(z) (y - b(z)) + b(z) - chi` at one
/// observation; its mean under the truth is zero.
#[inline]
pub fn efficient_influence(obs: Observation<'_>, a: &dyn Evaluable, b: &dyn Evaluable, chi: f64) -> f64 {
    let bz = b.value(obs.z);
    let correction = if obs.r {
        let y = if obs.ry { 1.0 } else { 0.0 };
        a.value(obs.z) * (y - bz)
    } else {
        0.0
    };
    correction + bz - chi
}

/// The efficient (minimal) asymptotic variance of `chi` and its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficientSummary {
    pub chi: f64,
    /// `int a b (1-b) dF`, the regression part.
    pub var_b_part: f64,
    /// `int b^2 dF - chi^2 = Var(b(Z))`, the covariate part.
    pub var_f_part: f64,
}

impl EfficientSummary {
    pub fn var_eff(&self) -> f64 {
        self.var_b_part + self.var_f_part
    }
}

/// Computes `chi`, `int a b(1-b) dF` and `Var(b(Z))` by quadrature (or
/// weighted sums for discrete `F`).
pub fn efficient_variance(params: &ParamTriple) -> Result<EfficientSummary> {
    let a = params.a.clone();
    let b = params.b.clone();
    let chi = params.dist.expect(b.as_ref())?;
    let b2 = {
        let b = b.clone();
        move |z: &[f64]| {
            let v = b.value(z);
            v * v
        }
    };
    let abb = {
        let b = b.clone();
        move |z: &[f64]| {
            let v = b.value(z);
            a.value(z) * v * (1.0 - v)
        }
    };
    let var_b_part = params.dist.expect(&abb)?;
    let var_f_part = (params.dist.expect(&b2)? - chi * chi).max(0.0);
    Ok(EfficientSummary {
        chi,
        var_b_part,
        var_f_part,
    })
}

/// Augmented inverse-probability-weighted estimate
/// `mean_i [ r_i a_hat(z_i) (y_i - b_hat(z_i)) + b_hat(z_i) ]`.
pub fn aipw_estimate(data: &Dataset, a_hat: &dyn Evaluable, b_hat: &dyn Evaluable) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let mut acc = KahanSum::new();
    for o in data.iter() {
        let bz = b_hat.value(o.z);
        let mut term = bz;
        if o.r {
            let y = if o.ry { 1.0 } else { 0.0 };
            term += a_hat.value(o.z) * (y - bz);
        }
        acc.add(term);
    }
    acc.value() / data.len() as f64
}

/// AIPW with the regression given per observation instead of as a function
/// (used when `b_hat` is a posterior mean evaluated at the data).
pub fn aipw_estimate_at(data: &Dataset, a_hat: &dyn Evaluable, b_at_obs: &[f64]) -> f64 {
    assert_eq!(b_at_obs.len(), data.len());
    let mut acc = KahanSum::new();
    for (o, &bz) in data.iter().zip(b_at_obs) {
        let mut term = bz;
        if o.r {
            let y = if o.ry { 1.0 } else { 0.0 };
            term += a_hat.value(o.z) * (y - bz);
        }
        acc.add(term);
    }
    acc.value() / data.len() as f64
}

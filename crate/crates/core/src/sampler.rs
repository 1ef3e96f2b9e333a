//! Posterior sampling for `(b, F)`.
//!
//! The regression posterior targets `exp(l^b(psi(map(theta)))) N(theta; 0, I)`
//! and is sampled by elliptical slice sampling: propose on the ellipse
//! `theta cos(phi) + nu sin(phi)` with `nu ~ N(0, I)` and shrink the bracket
//! until the log-likelihood clears the slice threshold, so every step
//! accepts and no tuning is needed. The covariate distribution is drawn
//! exactly: given the data, `F | Z ~ DP(nu + n F_n)`, which at `nu = 0` is
//! the Bayesian bootstrap (Dirichlet(1,..,1) weights on the observed points).
//! A draw of the mean response pairs one `b` draw with one independent `F`
//! draw and forms `int b dF`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::funcspace::Points;
use crate::math::{mean, softplus, KahanSum};
use crate::model::{psi, Dataset};
use crate::priors::SeedMap;
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub burnin: usize,
    /// Total retained draws across all chains.
    pub draws: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            burnin: 500,
            draws: 2000,
            thin: 2,
            chains: 2,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Diagnostics need enough draws; direct sampler calls may use fewer.
    pub fn validate(&self) -> Result<()> {
        if self.draws < 100 {
            return Err(Error::Config(format!(
                "draws = {} but diagnostics need at least 100",
                self.draws
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be >= 1".into()));
        }
        Ok(())
    }
}

/// Dirichlet-process configuration for the posterior of `F`. The base
/// measure is `base_mass * Uniform[0,1]^d`; zero mass is the Bayesian
/// bootstrap.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DpConfig {
    pub base_mass: f64,
    /// Stick-breaking truncation for the base component; the tail mass goes
    /// to the last stick. Unused when `base_mass = 0`.
    pub stick_truncation: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            base_mass: 0.0,
            stick_truncation: 1000,
        }
    }
}

/// Retained seed-vector draws, chain-major.
#[derive(Debug, Clone)]
pub struct ThetaDraws {
    pub draws: Vec<Vec<f64>>,
    pub chain_id: Vec<usize>,
    /// Mean likelihood evaluations per elliptical-slice step, per chain.
    pub likelihood_evals: Vec<f64>,
}

fn standard_normal_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// One elliptical slice step; mutates `theta`/`cur_ll` in place and returns
/// the number of likelihood evaluations.
fn ess_step(
    theta: &mut [f64],
    cur_ll: &mut f64,
    loglik: &impl Fn(&[f64]) -> f64,
    rng: &mut impl Rng,
    proposal: &mut Vec<f64>,
) -> Result<u32> {
    let dim = theta.len();
    let nu = standard_normal_vec(rng, dim);
    // 1 - U in (0, 1] keeps the log finite
    let threshold = *cur_ll + (1.0 - rng.random::<f64>()).ln();
    let tau = std::f64::consts::TAU;
    let mut phi = rng.random_range(0.0..tau);
    let (mut lo, mut hi) = (phi - tau, phi);
    let mut evals = 0u32;
    loop {
        proposal.clear();
        let (c, s) = (phi.cos(), phi.sin());
        proposal.extend(theta.iter().zip(&nu).map(|(t, n)| t * c + n * s));
        let ll = loglik(proposal);
        evals += 1;
        if ll.is_nan() {
            return Err(Error::NonFinite(format!("ESS proposal at phi = {phi}")));
        }
        if ll > threshold {
            theta.copy_from_slice(proposal);
            *cur_ll = ll;
            return Ok(evals);
        }
        if phi < 0.0 {
            lo = phi;
        } else {
            hi = phi;
        }
        if hi - lo < 1e-14 || evals > 10_000 {
            // the bracket has collapsed onto the current state
            return Ok(evals);
        }
        phi = rng.random_range(lo..hi);
    }
}

/// Runs `cfg.chains` independent elliptical-slice chains against an
/// arbitrary log-likelihood over a standard-Gaussian seed vector. Chain `c`
/// draws from the stream `(cfg.seed, CHAIN, c)` and initializes at an exact
/// prior draw.
pub fn sample_chains(
    seed_dim: usize,
    loglik: impl Fn(&[f64]) -> f64,
    cfg: &SamplerConfig,
) -> Result<ThetaDraws> {
    if cfg.chains == 0 || cfg.draws == 0 || cfg.thin == 0 {
        return Err(Error::Config("chains, draws and thin must be >= 1".into()));
    }
    let base = cfg.draws / cfg.chains;
    let extra = cfg.draws % cfg.chains;
    let mut draws = Vec::with_capacity(cfg.draws);
    let mut chain_id = Vec::with_capacity(cfg.draws);
    let mut evals_per_chain = Vec::with_capacity(cfg.chains);
    let mut proposal = Vec::with_capacity(seed_dim);
    for chain in 0..cfg.chains {
        let quota = base + usize::from(chain < extra);
        let mut rng = rng::stream(cfg.seed, &[tag::CHAIN, chain as u64]);
        let mut theta = standard_normal_vec(&mut rng, seed_dim);
        let mut cur_ll = loglik(&theta);
        if cur_ll.is_nan() {
            return Err(Error::NonFinite("initial state".into()));
        }
        let mut evals = 0u64;
        let mut steps = 0u64;
        for _ in 0..cfg.burnin {
            evals += ess_step(&mut theta, &mut cur_ll, &loglik, &mut rng, &mut proposal)? as u64;
            steps += 1;
        }
        let mut kept = 0usize;
        while kept < quota {
            for _ in 0..cfg.thin {
                evals +=
                    ess_step(&mut theta, &mut cur_ll, &loglik, &mut rng, &mut proposal)? as u64;
                steps += 1;
            }
            draws.push(theta.clone());
            chain_id.push(chain);
            kept += 1;
        }
        evals_per_chain.push(if steps == 0 {
            0.0
        } else {
            evals as f64 / steps as f64
        });
    }
    Ok(ThetaDraws {
        draws,
        chain_id,
        likelihood_evals: evals_per_chain,
    })
}

/// Binomial log-likelihood of the regression part: uses only observations
/// with `r = 1`. `log psi` and `log(1 - psi)` go through softplus, so no
/// clipping is ever needed.
pub struct RegressionLik {
    design: crate::priors::Design,
    y: Vec<bool>,
}

impl RegressionLik {
    pub fn new(data: &Dataset, map: &SeedMap) -> Result<Self> {
        let mut coords = Points::new(data.dim(), Vec::new()).expect("dim checked");
        let mut y = Vec::new();
        for o in data.iter() {
            if o.r {
                coords.push(o.z);
                y.push(o.ry);
            }
        }
        Ok(Self {
            design: map.design(&coords)?,
            y,
        })
    }

    pub fn num_observed(&self) -> usize {
        self.y.len()
    }

    pub fn loglik(&self, theta: &[f64], w_buf: &mut Vec<f64>) -> f64 {
        w_buf.resize(self.design.rows(), 0.0);
        self.design.matvec_into(theta, w_buf);
        let mut acc = KahanSum::new();
        for (&w, &y) in w_buf.iter().zip(&self.y) {
            // log psi(w) = -softplus(-w); log(1 - psi(w)) = -softplus(w)
            acc.add(if y { -softplus(-w) } else { -softplus(w) });
        }
        acc.value()
    }
}

/// Draws the seed-vector posterior of the regression given the data.
pub fn sample_b_posterior(
    data: &Dataset,
    map: &SeedMap,
    cfg: &SamplerConfig,
) -> Result<ThetaDraws> {
    let lik = RegressionLik::new(data, map)?;
    let cell = std::cell::RefCell::new(Vec::new());
    sample_chains(
        map.seed_dim(),
        move |theta| lik.loglik(theta, &mut cell.borrow_mut()),
        cfg,
    )
}

/// Exact posterior draw of `F`: Dirichlet weights on the observed points,
/// plus a stick-breaking base component when `base_mass > 0`.
pub fn draw_f(z_obs: &Points, dp: &DpConfig, rng: &mut impl Rng) -> crate::model::CovariateDist {
    let n = z_obs.len();
    let mut pts = z_obs.clone();
    let mut raw: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    if dp.base_mass > 0.0 {
        let g0 = Gamma::new(dp.base_mass, 1.0)
            .expect("base_mass > 0")
            .sample(rng);
        let mut stick_rest = 1.0;
        let t = dp.stick_truncation.max(1);
        for i in 0..t {
            let v = if i + 1 == t {
                1.0 // tail mass to the last stick
            } else {
                let b: f64 = rng.random::<f64>();
                // V ~ Beta(1, mass) via inverse cdf
                1.0 - (1.0 - b).powf(1.0 / dp.base_mass)
            };
            raw.push(g0 * stick_rest * v);
            stick_rest *= 1.0 - v;
            let mut atom = [0.0; 2];
            for a in atom.iter_mut().take(z_obs.dim()) {
                *a = rng.random();
            }
            pts.push(&atom[..z_obs.dim()]);
        }
    }
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    crate::model::CovariateDist::Discrete { pts, weights }
}

/// How the covariate distribution enters a mean-response draw.
#[derive(Debug, Clone)]
pub enum FRandomization {
    /// Draw `F` from its Dirichlet posterior (one draw per `b` draw).
    Dirichlet(DpConfig),
    /// Plug in the empirical distribution (diagnostic mode; underestimates
    /// the posterior spread of the functional).
    PlugEmpirical,
}

/// Joint posterior draws of the mean response.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub chi_draws: Vec<f64>,
    /// Per-draw regression values at the observed covariates, when retained.
    pub b_at_obs: Option<Vec<Vec<f64>>>,
    /// `lambda` per draw for the propensity-dependent prior.
    pub lambda_draws: Option<Vec<f64>>,
    pub chain_id: Vec<usize>,
    pub chain_chi_means: Vec<f64>,
    /// Mean likelihood evaluations per step, per chain.
    pub likelihood_evals: Vec<f64>,
}

impl PosteriorDraws {
    /// Largest absolute difference between per-chain mean responses; a crude
    /// mixing check.
    pub fn mixing_gap(&self) -> f64 {
        let mut gap = 0.0f64;
        for a in &self.chain_chi_means {
            for b in &self.chain_chi_means {
                gap = gap.max((a - b).abs());
            }
        }
        gap
    }

    /// Pointwise posterior mean of `b` at the observed covariates.
    pub fn posterior_mean_b(&self) -> Option<Vec<f64>> {
        let b = self.b_at_obs.as_ref()?;
        let n = b.first()?.len();
        let mut out = vec![0.0; n];
        for row in b {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in &mut out {
            *o /= b.len() as f64;
        }
        Some(out)
    }
}

/// Forms mean-response draws `chi_s = int b_s dF_s` from retained seed
/// draws: evaluates `b_s = psi(map(theta_s))` at the observed covariates and
/// pairs it with one independent `F` draw (or the empirical plug-in).
pub fn draw_chi(
    theta: &ThetaDraws,
    map: &SeedMap,
    z_obs: &Points,
    f_mode: &FRandomization,
    retain_b: bool,
    rng: &mut impl Rng,
) -> Result<PosteriorDraws> {
    let design = map.design(z_obs)?;
    let n = z_obs.len();
    let mut chi_draws = Vec::with_capacity(theta.draws.len());
    let mut b_rows = retain_b.then(Vec::new);
    let mut lambda_draws = map.sigma_lambda().map(|_| Vec::new());
    let mut w = vec![0.0; n];
    for t in &theta.draws {
        design.matvec_into(t, &mut w);
        let chi = match f_mode {
            FRandomization::PlugEmpirical => mean(&w.iter().map(|&x| psi(x)).collect::<Vec<_>>()),
            FRandomization::Dirichlet(dp) => {
                let mut raw_total = 0.0;
                let mut acc = KahanSum::new();
                for &x in &w {
                    let e = -(1.0 - rng.random::<f64>()).ln();
                    raw_total += e;
                    acc.add(e * psi(x));
                }
                if dp.base_mass > 0.0 {
                    let g0 = Gamma::new(dp.base_mass, 1.0)
                        .expect("base_mass > 0")
                        .sample(rng);
                    raw_total += g0;
                    let t_sticks = dp.stick_truncation.max(1);
                    let mut stick_rest = 1.0;
                    let mut atom = [0.0; 2];
                    let mut atoms = Points::new(z_obs.dim(), Vec::new()).expect("dim checked");
                    let mut masses = Vec::with_capacity(t_sticks);
                    for i in 0..t_sticks {
                        let v = if i + 1 == t_sticks {
                            1.0
                        } else {
                            1.0 - (1.0 - rng.random::<f64>()).powf(1.0 / dp.base_mass)
                        };
                        masses.push(g0 * stick_rest * v);
                        stick_rest *= 1.0 - v;
                        for a in atom.iter_mut().take(z_obs.dim()) {
                            *a = rng.random();
                        }
                        atoms.push(&atom[..z_obs.dim()]);
                    }
                    let base_vals = map.eval(t, &atoms)?;
                    for (m, x) in masses.iter().zip(&base_vals) {
                        acc.add(m * psi(*x));
                    }
                }
                acc.value() / raw_total
            }
        };
        chi_draws.push(chi);
        if let Some(rows) = &mut b_rows {
            rows.push(w.iter().map(|&x| psi(x)).collect());
        }
        if let Some(l) = &mut lambda_draws {
            l.push(map.lambda_of(t).expect("propensity-dependent map"));
        }
    }
    let chains = theta.likelihood_evals.len().max(1);
    let mut sums = vec![KahanSum::new(); chains];
    let mut counts = vec![0usize; chains];
    for (&c, &chi) in theta.chain_id.iter().zip(&chi_draws) {
        sums[c].add(chi);
        counts[c] += 1;
    }
    let chain_chi_means = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { f64::NAN } else { s.value() / c as f64 })
        .collect();
    Ok(PosteriorDraws {
        chi_draws,
        b_at_obs: b_rows,
        lambda_draws,
        chain_id: theta.chain_id.clone(),
        chain_chi_means,
        likelihood_evals: theta.likelihood_evals.clone(),
    })
}

/// Density-part log-likelihood `l^f(theta) = sum_i W(z_i) - n log int e^W`
/// for the exponentiated prior; the normalizer is a midpoint sum on the
/// dyadic grid.
pub struct DensityLik {
    design_obs: crate::priors::Design,
    design_grid: crate::priors::Design,
}

impl DensityLik {
    pub fn new(z_obs: &Points, inner: &SeedMap, grid_level: u32) -> Result<Self> {
        let grid = crate::funcspace::GridFunction::constant(grid_level, inner.dim(), 0.0);
        Ok(Self {
            design_obs: inner.design(z_obs)?,
            design_grid: inner.design(&grid.centers())?,
        })
    }

    pub fn loglik(&self, theta: &[f64], obs_buf: &mut Vec<f64>, grid_buf: &mut Vec<f64>) -> f64 {
        obs_buf.resize(self.design_obs.rows(), 0.0);
        grid_buf.resize(self.design_grid.rows(), 0.0);
        self.design_obs.matvec_into(theta, obs_buf);
        self.design_grid.matvec_into(theta, grid_buf);
        let max = grid_buf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean_exp =
            grid_buf.iter().map(|&v| (v - max).exp()).sum::<f64>() / grid_buf.len() as f64;
        let log_norm = max + mean_exp.ln();
        let mut acc = KahanSum::new();
        for &v in obs_buf.iter() {
            acc.add(v - log_norm);
        }
        acc.value()
    }
}

/// Seed-vector posterior for the exponentiated-process density prior on the
/// covariates; used by the density-vs-Dirichlet comparison experiment.
pub fn sample_f_density_posterior(
    z_obs: &Points,
    inner: &SeedMap,
    grid_level: u32,
    cfg: &SamplerConfig,
) -> Result<ThetaDraws> {
    let lik = DensityLik::new(z_obs, inner, grid_level)?;
    let bufs = std::cell::RefCell::new((Vec::new(), Vec::new()));
    sample_chains(
        inner.seed_dim(),
        move |theta| {
            let mut b = bufs.borrow_mut();
            let (obs, grid) = &mut *b;
            lik.loglik(theta, obs, grid)
        },
        cfg,
    )
}

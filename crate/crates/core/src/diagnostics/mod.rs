//! Diagnostics for the Bernstein-von Mises behaviour of the mean-response
//! posterior: centering statistics, distance of the scaled posterior draws
//! to the Gaussian limit `N(0, var_eff)`, credible-interval coverage, and
//! the Laplace-transform check for the Dirichlet posterior of `F`.

mod experiment;

pub use experiment::{
    coverage_experiment, density_bias_experiment, run_replication, summarize, CoverageSummary,
    DensityBiasRow, DensityBiasSummary, DensityPriorConfig, PosteriorKind, PriorConfig,
    Replication, Scenario,
};

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dgp::ModelTruth;
use crate::error::{Error, Result};
use crate::funcspace::Evaluable;
use crate::math::{ksum, mean, mean_var, quantile_sorted};
use crate::model::{aipw_estimate_at, CovariateDist, Dataset};
use crate::rng;
use crate::sampler::{draw_f, DpConfig};

/// Which centering sequence `chi_hat` the scaled draws are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterKind {
    /// `chi0 + mean_i chi_tilde_0(X_i)`; needs the simulation truth.
    OracleEfficient,
    /// AIPW with the pilot `a_hat` and the posterior-mean regression.
    Aipw,
}

/// Per-replication summary of the posterior against its Gaussian target.
#[derive(Debug, Clone)]
pub struct BvmReport {
    pub center_kind: CenterKind,
    pub chi_hat: f64,
    /// The efficient variance `var_eff` of the truth.
    pub target_var: f64,
    pub post_mean: f64,
    pub post_sd: f64,
    /// `sqrt(n) (chi_draw - chi_hat)`.
    pub scaled_draws: Vec<f64>,
    pub ks_dist: f64,
    pub w1_dist: f64,
    pub ci_level: f64,
    pub ci: (f64, f64),
    pub covered: bool,
}

/// Computes the centering statistic.
pub fn center(
    data: &Dataset,
    truth: Option<&ModelTruth>,
    b_at_obs: Option<&[f64]>,
    a_hat: Option<&dyn Evaluable>,
    kind: CenterKind,
) -> Result<f64> {
    match kind {
        CenterKind::OracleEfficient => {
            let truth = truth
                .ok_or_else(|| Error::Config("oracle centering needs the truth".into()))?;
            let infl = ksum(data.iter().map(|o| truth.influence(o)));
            Ok(truth.chi() + infl / data.len() as f64)
        }
        CenterKind::Aipw => {
            let a_hat =
                a_hat.ok_or_else(|| Error::Config("AIPW centering needs a pilot a_hat".into()))?;
            let b = b_at_obs
                .ok_or_else(|| Error::Config("AIPW centering needs the posterior-mean b".into()))?;
            Ok(aipw_estimate_at(data, a_hat, b))
        }
    }
}

/// Kolmogorov-Smirnov and Wasserstein-1 distances of the scaled draws to
/// `N(0, target_var)`. W1 is the average absolute quantile difference over
/// the 999-quantile grid.
pub fn normal_distance(scaled_draws: &[f64], target_var: f64) -> Result<(f64, f64)> {
    if scaled_draws.len() < 100 {
        return Err(Error::Degenerate(format!(
            "need >= 100 draws, got {}",
            scaled_draws.len()
        )));
    }
    if !(target_var > 0.0) {
        return Err(Error::Config(format!("target_var = {target_var} must be positive")));
    }
    let (_, v) = mean_var(scaled_draws);
    if v == 0.0 {
        return Err(Error::Degenerate("draws have zero variance".into()));
    }
    let sd = target_var.sqrt();
    let normal = Normal::new(0.0, sd).expect("positive sd");
    let mut sorted = scaled_draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut ks = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal.cdf(x);
        ks = ks.max(((i + 1) as f64 / n - f).abs());
        ks = ks.max((f - i as f64 / n).abs());
    }
    let mut w1 = 0.0;
    for q in 1..1000 {
        let p = q as f64 / 1000.0;
        w1 += (quantile_sorted(&sorted, p) - normal.inverse_cdf(p)).abs();
    }
    w1 /= 999.0;
    Ok((ks, w1))
}

/// Equal-tailed credible interval from the Hazen quantiles of the draws.
pub fn credible_interval(chi_draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Config(format!("level {level} outside (0,1)")));
    }
    let needed = (2.0 / (1.0 - level)).ceil() as usize;
    if chi_draws.len() < needed {
        return Err(Error::Degenerate(format!(
            "{} draws cannot resolve a {level} interval (need {needed})",
            chi_draws.len()
        )));
    }
    let mut sorted = chi_draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, (1.0 - level) / 2.0);
    let hi = quantile_sorted(&sorted, (1.0 + level) / 2.0);
    Ok((lo, hi))
}

/// Builds the [`BvmReport`] for one replication.
pub fn bvm_report(
    chi_draws: &[f64],
    chi_hat: f64,
    target_var: f64,
    n: usize,
    ci_level: f64,
    center_kind: CenterKind,
    chi_true: f64,
) -> Result<BvmReport> {
    let sqrt_n = (n as f64).sqrt();
    let scaled_draws: Vec<f64> = chi_draws.iter().map(|c| sqrt_n * (c - chi_hat)).collect();
    let (ks_dist, w1_dist) = normal_distance(&scaled_draws, target_var)?;
    let ci = credible_interval(chi_draws, ci_level)?;
    let (post_mean, post_var) = mean_var(chi_draws);
    Ok(BvmReport {
        center_kind,
        chi_hat,
        target_var,
        post_mean,
        post_sd: post_var.sqrt(),
        scaled_draws,
        ks_dist,
        w1_dist,
        ci_level,
        ci,
        covered: ci.0 <= chi_true && chi_true <= ci.1,
    })
}

/// One row of the Dirichlet-process Laplace-transform check.
#[derive(Debug, Clone)]
pub struct LaplaceRow {
    pub t: f64,
    /// Monte Carlo estimate of `E[exp(t sqrt(n) (F_n g - emp g)) | Z]`.
    pub mc_mean: f64,
    /// `exp(t^2 F0(g - F0 g)^2 / 2)`.
    pub analytic: f64,
    pub ratio: f64,
    pub mc_se: f64,
}

/// Verifies the Gaussian limit of the Dirichlet posterior process on one
/// covariate sample: for each `t`, the conditional Laplace transform of
/// `sqrt(n) (F_n g - emp g)` over posterior draws of `F` is compared with
/// `exp(t^2 F0(g - F0 g)^2 / 2)`, where the analytic variance comes from
/// quadrature against the true `F0`.
pub fn dp_laplace_check(
    f0: &CovariateDist,
    g: &dyn Evaluable,
    n: usize,
    t_list: &[f64],
    mc_reps: usize,
    dp: &DpConfig,
    seed: u64,
) -> Result<Vec<LaplaceRow>> {
    if n == 0 || mc_reps == 0 {
        return Err(Error::Degenerate("n and mc_reps must be positive".into()));
    }
    let mean_g = f0.expect(g)?;
    let var_g = f0.expect(&|z: &[f64]| {
        let d = g.value(z) - mean_g;
        d * d
    })?;
    let mut rng = rng::stream(seed, &[rng::tag::DATA]);
    let z = f0.draw_points(n, &mut rng);
    let g_vals: Vec<f64> = z.iter().map(|p| g.value(p)).collect();
    let emp = mean(&g_vals);
    let sqrt_n = (n as f64).sqrt();

    let mut rng = rng::stream(seed, &[rng::tag::FDRAW]);
    let mut acc: Vec<(f64, f64)> = vec![(0.0, 0.0); t_list.len()];
    let fast_bootstrap = dp.base_mass == 0.0;
    for _ in 0..mc_reps {
        let s = if fast_bootstrap {
            let mut total = 0.0;
            let mut dot = 0.0;
            for &gi in &g_vals {
                let e = -(1.0 - rng.random::<f64>()).ln();
                total += e;
                dot += e * gi;
            }
            sqrt_n * (dot / total - emp)
        } else {
            match draw_f(&z, dp, &mut rng) {
                CovariateDist::Discrete { pts, weights } => {
                    let fg: f64 = pts
                        .iter()
                        .zip(&weights)
                        .map(|(p, &w)| w * g.value(p))
                        .sum();
                    sqrt_n * (fg - emp)
                }
                _ => unreachable!("draw_f returns a discrete distribution"),
            }
        };
        for (k, &t) in t_list.iter().enumerate() {
            let e = (t * s).exp();
            acc[k].0 += e;
            acc[k].1 += e * e;
        }
    }
    Ok(t_list
        .iter()
        .zip(&acc)
        .map(|(&t, &(sum, sumsq))| {
            let m = sum / mc_reps as f64;
            let var = (sumsq / mc_reps as f64 - m * m).max(0.0);
            let analytic = (t * t * var_g / 2.0).exp();
            LaplaceRow {
                t,
                mc_mean: m,
                analytic,
                ratio: m / analytic,
                mc_se: (var / mc_reps as f64).sqrt(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::TruthSpec;
    use crate::funcspace::Points;
    use crate::rng::tag;
    use rand_distr::Distribution;

    #[test]
    fn center_oracle_on_a_single_missing_observation() {
        // dataset of size 1 with r = 0 and constant-b truth: influence is 0
        // so the oracle center equals chi0
        let spec = TruthSpec {
            amp_a: 0.0,
            amp_b: 0.0,
            ..TruthSpec::default()
        };
        let truth = ModelTruth::synthesize(&spec).unwrap();
        let pts = Points::from_1d(vec![0.4]).unwrap();
        let data = Dataset::new(pts, vec![false], vec![false]).unwrap();
        let c = center(&data, Some(&truth), None, None, CenterKind::OracleEfficient).unwrap();
        assert!((c - truth.chi()).abs() < 1e-12);
        assert!((truth.chi() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn center_oracle_requires_truth() {
        let pts = Points::from_1d(vec![0.4]).unwrap();
        let data = Dataset::new(pts, vec![false], vec![false]).unwrap();
        assert!(center(&data, None, None, None, CenterKind::OracleEfficient).is_err());
    }

    #[test]
    fn center_aipw_reduces_to_ybar_when_fully_observed() {
        let pts = Points::from_1d(vec![0.1, 0.5, 0.9]).unwrap();
        let data = Dataset::new(pts, vec![true; 3], vec![true, false, true]).unwrap();
        let b = vec![0.3, 0.3, 0.3];
        let one = |_: &[f64]| 1.0;
        let c = center(&data, None, Some(&b), Some(&one), CenterKind::Aipw).unwrap();
        assert!((c - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn center_oracle_clt_over_replications() {
        // mean over replications ~ chi0, variance ~ var_eff / n within 25%
        let truth = ModelTruth::synthesize(&TruthSpec::default()).unwrap();
        let n = 500;
        let reps = 200;
        let mut centers = Vec::with_capacity(reps);
        for rep in 0..reps {
            let mut rng = rng::stream(314, &[tag::DATA, rep as u64]);
            let data = truth.simulate(n, &mut rng);
            centers.push(
                center(&data, Some(&truth), None, None, CenterKind::OracleEfficient).unwrap(),
            );
        }
        let (m, v) = mean_var(&centers);
        let expect_var = truth.efficient().var_eff() / n as f64;
        assert!((m - truth.chi()).abs() < 4.0 * (expect_var / reps as f64).sqrt());
        assert!(
            (v - expect_var).abs() / expect_var < 0.25,
            "var {v} vs {expect_var}"
        );
    }

    #[test]
    fn normal_distance_identifies_its_own_law() {
        let normal = rand_distr::Normal::new(0.0, 1.4).unwrap();
        let mut rng = rng::stream(2, &[]);
        let draws: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
        let (ks, w1) = normal_distance(&draws, 1.4 * 1.4).unwrap();
        assert!(ks <= 0.01, "self-distance ks = {ks}");
        assert!(w1 < 0.02, "self-distance w1 = {w1}");
    }

    #[test]
    fn normal_distance_sees_a_shift() {
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let mut rng = rng::stream(3, &[]);
        let draws: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng) + 1.0).collect();
        let (_, w1) = normal_distance(&draws, 1.0).unwrap();
        assert!((w1 - 1.0).abs() < 0.02, "translation moves W1 by 1: {w1}");
    }

    #[test]
    fn normal_distance_sees_a_variance_mismatch() {
        // draws from N(0, 2 sigma^2) vs target N(0, sigma^2): the KS limit is
        // sup |Phi(x) - Phi(x/sqrt(2))| ~ 0.0830 (analytic sup evaluated
        // numerically at x* = sqrt(2 ln 2))
        let x_star = (2.0 * (2.0f64).ln()).sqrt();
        let std = Normal::new(0.0, 1.0).unwrap();
        let oracle = (std.cdf(x_star) - std.cdf(x_star / 2.0f64.sqrt())).abs();
        assert!((oracle - 0.083).abs() < 5e-4);
        let wide = rand_distr::Normal::new(0.0, 2.0f64.sqrt()).unwrap();
        let mut rng = rng::stream(4, &[]);
        let draws: Vec<f64> = (0..200_000).map(|_| wide.sample(&mut rng)).collect();
        let (ks, _) = normal_distance(&draws, 1.0).unwrap();
        assert!((ks - oracle).abs() < 0.01, "ks {ks} vs oracle {oracle}");
    }

    #[test]
    fn normal_distance_degenerate_inputs() {
        assert!(normal_distance(&[0.0; 50], 1.0).is_err());
        assert!(normal_distance(&[1.0; 200], 1.0).is_err());
        let draws: Vec<f64> = (0..200).map(|i| i as f64).collect();
        assert!(normal_distance(&draws, 0.0).is_err());
    }

    #[test]
    fn credible_interval_on_1_to_100() {
        let draws: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = credible_interval(&draws, 0.9).unwrap();
        assert!((lo - 5.5).abs() < 1e-12);
        assert!((hi - 95.5).abs() < 1e-12);
    }

    #[test]
    fn credible_interval_of_constant_draws_is_a_point() {
        let draws = vec![0.42; 64];
        let (lo, hi) = credible_interval(&draws, 0.5).unwrap();
        assert_eq!((lo, hi), (0.42, 0.42));
    }

    #[test]
    fn credible_interval_is_symmetric_for_symmetric_draws() {
        let m = 3.0;
        let mut draws = Vec::new();
        for i in 1..=500 {
            draws.push(m + i as f64 / 500.0);
            draws.push(m - i as f64 / 500.0);
        }
        let (lo, hi) = credible_interval(&draws, 0.8).unwrap();
        assert!(
            ((lo + hi) / 2.0 - m).abs() < 1e-3,
            "midpoint {} vs {m}",
            (lo + hi) / 2.0
        );
    }

    #[test]
    fn credible_interval_needs_enough_draws() {
        let draws = vec![1.0, 2.0, 3.0];
        assert!(credible_interval(&draws, 0.95).is_err());
        assert!(credible_interval(&draws, 2.0).is_err());
    }

    #[test]
    fn laplace_ratio_is_one_at_t_zero_and_for_constant_g() {
        let f0 = CovariateDist::Uniform { dim: 1 };
        let rows = dp_laplace_check(
            &f0,
            &|z: &[f64]| z[0],
            200,
            &[0.0],
            2_000,
            &DpConfig::default(),
            5,
        )
        .unwrap();
        assert_eq!(rows[0].ratio, 1.0);
        // constant g: F_n g - emp g = 0 because weights sum to one
        let rows = dp_laplace_check(
            &f0,
            &|_: &[f64]| 3.3,
            200,
            &[-1.0, 0.7],
            2_000,
            &DpConfig::default(),
            5,
        )
        .unwrap();
        for row in rows {
            assert!((row.ratio - 1.0).abs() < 1e-12, "t = {}: {row:?}", row.t);
        }
    }

    #[test]
    fn laplace_check_matches_uniform_variance() {
        // g(z) = z under U[0,1]: F0(g - F0 g)^2 = 1/12, so the analytic side
        // is exp(t^2/24)
        let f0 = CovariateDist::Uniform { dim: 1 };
        let rows = dp_laplace_check(
            &f0,
            &|z: &[f64]| z[0],
            2000,
            &[0.5],
            20_000,
            &DpConfig::default(),
            11,
        )
        .unwrap();
        let row = &rows[0];
        assert!((row.analytic - (0.25f64 / 24.0).exp()).abs() < 1e-8);
        assert!(
            (row.ratio - 1.0).abs() < 0.05,
            "ratio {} should be within 5%",
            row.ratio
        );
    }

    #[test]
    fn laplace_check_with_base_mass_runs() {
        let f0 = CovariateDist::Uniform { dim: 1 };
        let dp = DpConfig {
            base_mass: 2.0,
            stick_truncation: 100,
        };
        let rows =
            dp_laplace_check(&f0, &|z: &[f64]| z[0], 500, &[0.5], 2_000, &dp, 3).unwrap();
        assert!((rows[0].ratio - 1.0).abs() < 0.1);
    }
}

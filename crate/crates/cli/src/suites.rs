//! Canned experiment suites.
//!
//! - `smoothness-grid`: coverage over a grid of truth smoothness pairs
//!   `(alpha, beta)`, flagging cells on the first-order boundary
//!   `alpha/(2 alpha + d) + beta/(2 beta + d) = 1/2`.
//! - `single-robustness`: paired comparison of the plain series prior and
//!   the propensity-dependent prior over rough-propensity cells.
//! - `dp-vs-density`: paired center-bias comparison of the Dirichlet
//!   posterior on `F` against an oversmoothed exponentiated density prior.
//! - `dp-laplace`: Monte Carlo check of the Dirichlet posterior Laplace
//!   transform against its Gaussian limit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use meanresp::diagnostics::{
    density_bias_experiment, dp_laplace_check, DensityPriorConfig, Scenario,
};
use meanresp::model::CovariateDist;
use meanresp::rng;
use meanresp::sampler::DpConfig;

use crate::config::ScenarioConfig;
use crate::runner::{run_scenario, with_pool, CellCoord};
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteName {
    SmoothnessGrid,
    SingleRobustness,
    DpVsDensity,
    DpLaplace,
}

impl FromStr for SuiteName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoothness-grid" => Ok(Self::SmoothnessGrid),
            "single-robustness" => Ok(Self::SingleRobustness),
            "dp-vs-density" => Ok(Self::DpVsDensity),
            "dp-laplace" => Ok(Self::DpLaplace),
            other => Err(CliError::Invalid(format!(
                "unknown suite {other:?}; expected smoothness-grid, single-robustness, \
                 dp-vs-density or dp-laplace"
            ))),
        }
    }
}

/// Command-line overrides applied on top of each suite's pinned defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub pilot_reuse: Option<bool>,
}

fn float_label(x: f64) -> String {
    let mut s = format!("{x}");
    s = s.replace('.', "p");
    s
}

fn write_summary(out_dir: &Path, rows: &str, json: &serde_json::Value) -> Result<()> {
    fs::write(out_dir.join("summary.csv"), rows)?;
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(json)?)?;
    Ok(())
}

/// Expands a suite into its scenario grid, runs every cell (continuing past
/// per-cell failures) and writes a combined summary keyed by the grid
/// coordinates.
pub fn run_suite(
    name: SuiteName,
    ov: &Overrides,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    match name {
        SuiteName::SmoothnessGrid => smoothness_grid(ov, out_dir, jobs),
        SuiteName::SingleRobustness => single_robustness(ov, out_dir, jobs),
        SuiteName::DpVsDensity => dp_vs_density(ov, out_dir, jobs),
        SuiteName::DpLaplace => dp_laplace(ov, out_dir),
    }
}

fn smoothness_grid(ov: &Overrides, out_dir: &Path, jobs: Option<usize>) -> Result<()> {
    let grid = [0.5, 1.0, 2.0];
    let reps = ov.reps.unwrap_or(50);
    let n = ov.n.unwrap_or(500);
    let seed = ov.seed.unwrap_or(1);
    let dim = 1.0;
    let mut csv = String::from(
        "alpha,beta,threshold_sum,threshold_met,at_threshold,coverage,sd_ratio,median_ks,median_w1\n",
    );
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (i, &alpha) in grid.iter().enumerate() {
        for (j, &beta) in grid.iter().enumerate() {
            let mut sc = Scenario::smooth(n);
            sc.truth.alpha = alpha;
            sc.truth.beta = beta;
            sc.prior = meanresp::diagnostics::PriorConfig::Series {
                betabar: beta,
                scale_exp: 0.0,
            };
            let cell_name = format!("alpha{}_beta{}", float_label(alpha), float_label(beta));
            let cfg = ScenarioConfig::from_scenario(
                &cell_name,
                &sc,
                reps,
                rng::derive(seed, &[(i * grid.len() + j) as u64]),
            );
            let cell_dir = out_dir.join(&cell_name);
            let coord = CellCoord {
                x: format!("{alpha}"),
                y: format!("{beta}"),
            };
            let threshold_sum =
                alpha / (2.0 * alpha + dim) + beta / (2.0 * beta + dim);
            let threshold_met = threshold_sum >= 0.5 - 1e-9;
            let at_threshold = (threshold_sum - 0.5).abs() <= 1e-9;
            match run_scenario(&cfg, &cell_dir, jobs, Some(coord)) {
                Ok(out) => {
                    let s = &out.summary;
                    writeln!(
                        csv,
                        "{alpha},{beta},{threshold_sum},{threshold_met},{at_threshold},{},{},{},{}",
                        s.coverage, s.sd_ratio, s.median_ks, s.median_w1
                    )
                    .expect("string write");
                    cells.push(serde_json::json!({
                        "alpha": alpha, "beta": beta,
                        "threshold_sum": threshold_sum,
                        "threshold_met": threshold_met,
                        "at_threshold": at_threshold,
                        "coverage": s.coverage,
                        "sd_ratio": s.sd_ratio,
                    }));
                }
                Err(e) => {
                    failures.push(serde_json::json!({"cell": cell_name, "error": e.to_string()}));
                }
            }
        }
    }
    write_summary(
        out_dir,
        &csv,
        &serde_json::json!({
            "schema": 1, "suite": "smoothness-grid", "n": n, "reps": reps,
            "cells": cells, "failures": failures,
        }),
    )
}

fn single_robustness(ov: &Overrides, out_dir: &Path, jobs: Option<usize>) -> Result<()> {
    let alphas = [0.2, 0.3, 0.5];
    let reps = ov.reps.unwrap_or(200);
    let n = ov.n.unwrap_or(1000);
    let seed = ov.seed.unwrap_or(1);
    let mut csv = String::from("alpha,prior,coverage,sd_ratio,median_ks,mean_center_bias\n");
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (i, &alpha) in alphas.iter().enumerate() {
        // both arms share the master seed, so replication r sees the same
        // simulated dataset under either prior
        let cell_seed = rng::derive(seed, &[i as u64]);
        for dep in [false, true] {
            let mut sc = Scenario::single_robustness(n, alpha, dep);
            if let Some(reuse) = ov.pilot_reuse {
                sc.pilot_reuse = reuse;
            }
            let arm = if dep { "propensity-dependent" } else { "series" };
            let cell_name = format!("alpha{}_{arm}", float_label(alpha));
            let cfg = ScenarioConfig::from_scenario(&cell_name, &sc, reps, cell_seed);
            let coord = CellCoord {
                x: format!("{alpha}"),
                y: arm.to_string(),
            };
            match run_scenario(&cfg, &out_dir.join(&cell_name), jobs, Some(coord)) {
                Ok(out) => {
                    let s = &out.summary;
                    writeln!(
                        csv,
                        "{alpha},{arm},{},{},{},{}",
                        s.coverage, s.sd_ratio, s.median_ks, s.mean_center_bias
                    )
                    .expect("string write");
                    cells.push(serde_json::json!({
                        "alpha": alpha, "prior": arm,
                        "coverage": s.coverage, "sd_ratio": s.sd_ratio,
                        "mean_center_bias": s.mean_center_bias,
                    }));
                }
                Err(e) => {
                    failures.push(serde_json::json!({"cell": cell_name, "error": e.to_string()}));
                }
            }
        }
    }
    write_summary(
        out_dir,
        &csv,
        &serde_json::json!({
            "schema": 1, "suite": "single-robustness", "n": n, "reps": reps,
            "cells": cells, "failures": failures,
        }),
    )
}

fn dp_vs_density(ov: &Overrides, out_dir: &Path, jobs: Option<usize>) -> Result<()> {
    let reps = ov.reps.unwrap_or(100);
    let n = ov.n.unwrap_or(500);
    let seed = ov.seed.unwrap_or(1);
    let sc = Scenario::rough_density(n);
    let density = DensityPriorConfig::default();
    let (rows, summary) =
        with_pool(jobs, || density_bias_experiment(&sc, &density, reps, seed))??;
    let mut csv =
        String::from("rep_id,chi_true,post_mean_dp,post_mean_density,covered_dp,covered_density\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.rep_id,
            r.chi_true,
            r.post_mean_dp,
            r.post_mean_density,
            r.covered_dp as u8,
            r.covered_density as u8
        )
        .expect("string write");
    }
    fs::write(out_dir.join("pairs.csv"), &csv)?;
    let json = serde_json::json!({
        "schema": 1, "suite": "dp-vs-density", "n": n, "reps": reps,
        "gamma_true": sc.truth.gamma, "gammabar_prior": density.gammabar,
        "cell": {"x": "dp-vs-density", "y": ""},
        "frac_dp_not_worse": summary.frac_dp_not_worse,
        "coverage_dp": summary.coverage_dp,
        "coverage_density": summary.coverage_density,
        "mean_abs_bias_dp": summary.mean_abs_bias_dp,
        "mean_abs_bias_density": summary.mean_abs_bias_density,
    });
    fs::write(
        out_dir.join("aggregate.json"),
        serde_json::to_string_pretty(&json)?,
    )?;
    let mut metrics = String::from("metric,value\n");
    for (k, v) in [
        ("frac_dp_not_worse", summary.frac_dp_not_worse),
        ("coverage_dp", summary.coverage_dp),
        ("coverage_density", summary.coverage_density),
        ("mean_abs_bias_dp", summary.mean_abs_bias_dp),
        ("mean_abs_bias_density", summary.mean_abs_bias_density),
    ] {
        writeln!(metrics, "{k},{v}").expect("string write");
    }
    write_summary(out_dir, &metrics, &json)
}

fn dp_laplace(ov: &Overrides, out_dir: &Path) -> Result<()> {
    let n = ov.n.unwrap_or(2000);
    let mc_reps = ov.reps.unwrap_or(100_000);
    let seed = ov.seed.unwrap_or(1);
    let t_list = [-1.0, -0.5, 0.5, 1.0];
    let f0 = CovariateDist::Uniform { dim: 1 };
    let rows = dp_laplace_check(
        &f0,
        &|z: &[f64]| z[0],
        n,
        &t_list,
        mc_reps,
        &DpConfig::default(),
        seed,
    )?;
    let mut csv = String::from("t,mc_mean,analytic,ratio,mc_se\n");
    let mut worst: f64 = 0.0;
    let mut cells = Vec::new();
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            r.t, r.mc_mean, r.analytic, r.ratio, r.mc_se
        )
        .expect("string write");
        worst = worst.max((r.ratio - 1.0).abs());
        cells.push(serde_json::json!({
            "t": r.t, "ratio": r.ratio, "mc_se": r.mc_se,
        }));
    }
    write_summary(
        out_dir,
        &csv,
        &serde_json::json!({
            "schema": 1, "suite": "dp-laplace", "n": n, "mc_reps": mc_reps,
            "max_abs_ratio_deviation": worst, "rows": cells,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        assert_eq!(
            SuiteName::from_str("smoothness-grid").unwrap(),
            SuiteName::SmoothnessGrid
        );
        assert!(SuiteName::from_str("nope").is_err());
    }

    #[test]
    fn dp_laplace_suite_writes_ratio_table() {
        let dir = tempfile::tempdir().unwrap();
        let ov = Overrides {
            reps: Some(20_000),
            n: Some(500),
            seed: Some(3),
            pilot_reuse: None,
        };
        run_suite(SuiteName::DpLaplace, &ov, dir.path(), None).unwrap();
        let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(csv.starts_with("t,mc_mean,analytic,ratio,mc_se"));
        assert_eq!(csv.lines().count(), 5, "four t values");
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        let worst = json["max_abs_ratio_deviation"].as_f64().unwrap();
        assert!(worst < 0.05, "ratios should sit within 5%: {worst}");
    }

    #[test]
    fn smoothness_grid_flags_the_boundary_cell() {
        // tiny grid run: reps and n scaled down for test speed
        let dir = tempfile::tempdir().unwrap();
        let ov = Overrides {
            reps: Some(2),
            n: Some(100),
            seed: Some(5),
            pilot_reuse: None,
        };
        run_suite(SuiteName::SmoothnessGrid, &ov, dir.path(), Some(2)).unwrap();
        let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(csv.lines().count(), 10, "header plus nine cells");
        let boundary: Vec<&str> = csv
            .lines()
            .filter(|l| l.starts_with("0.5,0.5,"))
            .collect();
        assert_eq!(boundary.len(), 1);
        assert!(
            boundary[0].contains(",true,true,"),
            "alpha = beta = d/2 must be flagged at-threshold: {}",
            boundary[0]
        );
        // per-cell outputs exist
        assert!(dir.path().join("alpha0p5_beta0p5/alpha0p5_beta0p5.csv").exists());
    }
}

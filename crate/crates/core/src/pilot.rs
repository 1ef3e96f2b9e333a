//! Pilot estimators of the inverse propensity score `a0 = 1/P(R=1|Z)`.
//!
//! The fitted estimate always satisfies `1 <= a_hat <= 1/clip`: the cellwise
//! or logistic propensity estimate is clipped into `[clip, 1-clip]` before
//! inversion. By default the pilot is fit on a data split disjoint from the
//! observations entering the posterior.

use rand::seq::SliceRandom;

use crate::dgp::ModelTruth;
use crate::error::{Error, Result};
use crate::funcspace::{Evaluable, GridFunction, WaveletBasis};
use crate::math::{median, solve_spd};
use crate::model::{psi, Dataset};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PilotKind {
    /// Piecewise-constant propensity on `bins^d` cells with add-half
    /// smoothing `(sum r + 1/2) / (count + 1)`. `bins = 0` selects
    /// `ceil(n^{1/(2+d)})` at fit time.
    Regressogram { bins: usize },
    /// Logistic regression of `R` on wavelet features up to `level`.
    SeriesLogistic { level: u32 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PilotSpec {
    #[serde(flatten)]
    pub kind: PilotKind,
    /// Fraction of the data reserved for the pilot fit.
    pub split_fraction: f64,
    /// Propensity clip; the fitted `a_hat` stays in `[1, 1/clip]`.
    pub clip: f64,
}

impl Default for PilotSpec {
    fn default() -> Self {
        Self {
            kind: PilotKind::Regressogram { bins: 0 },
            split_fraction: 0.5,
            clip: 0.05,
        }
    }
}

impl PilotSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split_fraction {} outside (0,1)",
                self.split_fraction
            )));
        }
        if !(self.clip > 0.0 && self.clip < 0.5) {
            return Err(Error::Config(format!("clip {} outside (0,0.5)", self.clip)));
        }
        Ok(())
    }
}

/// Splits a dataset into `(pilot, inference)` parts of sizes
/// `(round(fraction*n), n - round(fraction*n))`, deterministically in `seed`.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if data.len() < 2 {
        return Err(Error::Degenerate("need at least 2 observations".into()));
    }
    let n_pilot = (fraction * data.len() as f64).round() as usize;
    if n_pilot == 0 || n_pilot == data.len() {
        return Err(Error::Degenerate(format!(
            "split fraction {fraction} leaves an empty part at n = {}",
            data.len()
        )));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng::stream(seed, &[tag::SPLIT]);
    idx.shuffle(&mut rng);
    Ok((data.subset(&idx[..n_pilot]), data.subset(&idx[n_pilot..])))
}

/// A fitted inverse-propensity estimate.
#[derive(Debug, Clone)]
pub enum FittedPilot {
    Regressogram {
        bins: usize,
        dim: usize,
        /// `a_hat` per cell.
        cells: Vec<f64>,
    },
    Logistic {
        basis: WaveletBasis,
        level: u32,
        coefs: Vec<f64>,
        clip: f64,
    },
}

impl FittedPilot {
    /// Exports the estimate on a dyadic grid.
    pub fn to_grid(&self, level: u32) -> GridFunction {
        let dim = match self {
            FittedPilot::Regressogram { dim, .. } => *dim,
            FittedPilot::Logistic { basis, .. } => basis.dim(),
        };
        GridFunction::from_fn(level, dim, |z| self.value(z))
    }

    fn logistic_features(basis: &WaveletBasis, level: u32, z: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        for j in 1..=level {
            for k in 0..basis.level_count(j) {
                out.push(basis.evaluate_unchecked(j, k, z));
            }
        }
    }
}

impl Evaluable for FittedPilot {
    fn value(&self, z: &[f64]) -> f64 {
        match self {
            FittedPilot::Regressogram { bins, dim, cells } => {
                let mut idx = 0usize;
                for &x in &z[..*dim] {
                    let i = ((x * *bins as f64) as usize).min(bins - 1);
                    idx = idx * bins + i;
                }
                cells[idx]
            }
            FittedPilot::Logistic {
                basis,
                level,
                coefs,
                clip,
            } => {
                let mut feats = Vec::with_capacity(coefs.len());
                Self::logistic_features(basis, *level, z, &mut feats);
                let lin: f64 = feats.iter().zip(coefs).map(|(f, c)| f * c).sum();
                1.0 / psi(lin).clamp(*clip, 1.0 - *clip)
            }
        }
    }
}

fn auto_bins(n: usize, dim: usize) -> usize {
    (n as f64).powf(1.0 / (2.0 + dim as f64)).ceil() as usize
}

/// Fits the pilot on `pilot_set`. Empty regressogram cells fall back to the
/// global add-half rate; the returned estimate respects `1 <= a_hat <= 1/clip`.
pub fn fit_pilot(pilot_set: &Dataset, spec: &PilotSpec) -> Result<FittedPilot> {
    spec.validate()?;
    if pilot_set.is_empty() {
        return Err(Error::Degenerate("empty pilot set".into()));
    }
    let dim = pilot_set.dim();
    match spec.kind {
        PilotKind::Regressogram { bins } => {
            let bins = if bins == 0 {
                auto_bins(pilot_set.len(), dim)
            } else {
                bins
            };
            let n_cells = bins.pow(dim as u32);
            let mut count = vec![0usize; n_cells];
            let mut hits = vec![0usize; n_cells];
            for o in pilot_set.iter() {
                let mut idx = 0usize;
                for &x in &o.z[..dim] {
                    let i = ((x * bins as f64) as usize).min(bins - 1);
                    idx = idx * bins + i;
                }
                count[idx] += 1;
                hits[idx] += o.r as usize;
            }
            let global =
                (pilot_set.num_observed() as f64 + 0.5) / (pilot_set.len() as f64 + 1.0);
            let cells = count
                .iter()
                .zip(&hits)
                .map(|(&c, &h)| {
                    let rate = if c == 0 {
                        global
                    } else {
                        (h as f64 + 0.5) / (c as f64 + 1.0)
                    };
                    1.0 / rate.clamp(spec.clip, 1.0 - spec.clip)
                })
                .collect();
            Ok(FittedPilot::Regressogram { bins, dim, cells })
        }
        PilotKind::SeriesLogistic { level } => {
            let basis = WaveletBasis::haar(dim, level.max(1));
            let p = 1 + basis.count_up_to(level);
            let mut coefs = vec![0.0; p];
            let mut feats = Vec::with_capacity(p);
            // Newton-Raphson with a small ridge for empty-feature stability
            let mut design: Vec<f64> = Vec::with_capacity(pilot_set.len() * p);
            for o in pilot_set.iter() {
                FittedPilot::logistic_features(&basis, level, o.z, &mut feats);
                design.extend_from_slice(&feats);
            }
            for _ in 0..50 {
                let mut hessian = vec![0.0; p * p];
                let mut score = vec![0.0; p];
                for (i, o) in pilot_set.iter().enumerate() {
                    let row = &design[i * p..(i + 1) * p];
                    let lin: f64 = row.iter().zip(&coefs).map(|(f, c)| f * c).sum();
                    let mu = psi(lin);
                    let w = (mu * (1.0 - mu)).max(1e-6);
                    let resid = (o.r as u8 as f64) - mu;
                    for a in 0..p {
                        score[a] += row[a] * resid;
                        for b in a..p {
                            hessian[a * p + b] += w * row[a] * row[b];
                        }
                    }
                }
                for a in 0..p {
                    for b in 0..a {
                        hessian[a * p + b] = hessian[b * p + a];
                    }
                    hessian[a * p + a] += 1e-6;
                }
                let step = solve_spd(&hessian, &score, p)
                    .ok_or_else(|| Error::Degenerate("singular logistic fit".into()))?;
                let mut max_step = 0.0f64;
                for (c, s) in coefs.iter_mut().zip(&step) {
                    *c += s;
                    max_step = max_step.max(s.abs());
                }
                if max_step < 1e-10 {
                    break;
                }
            }
            Ok(FittedPilot::Logistic {
                basis,
                level,
                coefs,
                clip: spec.clip,
            })
        }
    }
}

/// One row of the rate probe: median `L^2(F0)` error of the pilot at a
/// given sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProbeRow {
    pub n: usize,
    pub median_l2_error: f64,
}

/// Fits the pilot on fresh simulated datasets of each size in `n_list` and
/// reports the median `L^2(F0)` distance to the true `a0` computed by grid
/// quadrature.
pub fn pilot_rate_probe(
    truth: &ModelTruth,
    spec: &PilotSpec,
    n_list: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<RateProbeRow>> {
    let mut rows = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let mut errs = Vec::with_capacity(reps);
        for rep in 0..reps {
            let mut rng = rng::stream(seed, &[tag::PILOT, i as u64, rep as u64]);
            let data = truth.simulate(n, &mut rng);
            let fit = fit_pilot(&data, spec)?;
            errs.push(l2_error(&fit, truth)?);
        }
        rows.push(RateProbeRow {
            n,
            median_l2_error: median(&errs),
        });
    }
    Ok(rows)
}

/// `||a_hat - a0||_{L^2(F0)}` by quadrature on the truth grid.
pub fn l2_error(fit: &dyn Evaluable, truth: &ModelTruth) -> Result<f64> {
    let a0 = truth.a0();
    let diff2 = |z: &[f64]| {
        let d = fit.value(z) - a0.value(z);
        d * d
    };
    Ok(truth.dist().expect(&diff2)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::TruthSpec;
    use crate::funcspace::Points;
    use crate::model::CovariateDist;

    fn toy_dataset(n: usize, seed: u64) -> Dataset {
        let truth = ModelTruth::synthesize(&TruthSpec::default()).unwrap();
        let mut rng = rng::stream(seed, &[tag::DATA]);
        truth.simulate(n, &mut rng)
    }

    #[test]
    fn split_sizes_and_determinism() {
        let data = toy_dataset(10, 1);
        let (p, i) = split(&data, 0.5, 3).unwrap();
        assert_eq!((p.len(), i.len()), (5, 5));
        let (p2, _) = split(&data, 0.5, 3).unwrap();
        for (a, b) in p.iter().zip(p2.iter()) {
            assert_eq!(a.z, b.z);
        }
        let data = toy_dataset(1000, 2);
        let (p, i) = split(&data, 0.3, 3).unwrap();
        assert_eq!((p.len(), i.len()), (300, 700));
    }

    #[test]
    fn split_partitions_are_disjoint_and_exhaustive() {
        let data = toy_dataset(101, 5);
        let (p, i) = split(&data, 0.4, 9).unwrap();
        assert_eq!(p.len() + i.len(), data.len());
        let mut seen: Vec<f64> = p.iter().chain(i.iter()).map(|o| o.z[0]).collect();
        let mut orig: Vec<f64> = data.iter().map(|o| o.z[0]).collect();
        seen.sort_by(f64::total_cmp);
        orig.sort_by(f64::total_cmp);
        assert_eq!(seen, orig);
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let data = toy_dataset(10, 1);
        assert!(split(&data, 0.01, 3).is_err());
        assert!(split(&data, 0.99, 3).is_err());
    }

    #[test]
    fn regressogram_single_cell_arithmetic() {
        // r-values {1,1,0,0}: propensity (2 + 0.5)/(4 + 1) = 0.5, a_hat = 2
        let pts = Points::from_1d(vec![0.1, 0.3, 0.6, 0.9]).unwrap();
        let data = Dataset::new(
            pts,
            vec![true, true, false, false],
            vec![true, false, false, false],
        )
        .unwrap();
        let spec = PilotSpec {
            kind: PilotKind::Regressogram { bins: 1 },
            ..PilotSpec::default()
        };
        let fit = fit_pilot(&data, &spec).unwrap();
        assert!((fit.value(&[0.5]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn regressogram_clips_at_the_floor() {
        // all r = 1: raw rate (n + 0.5)/(n + 1) < 1 but clipping binds first
        // only at the configured margin, so a_hat = 1/(1 - clip)
        let pts = Points::from_1d(vec![0.1, 0.3, 0.6, 0.9]).unwrap();
        let data = Dataset::new(pts, vec![true; 4], vec![false; 4]).unwrap();
        let spec = PilotSpec {
            kind: PilotKind::Regressogram { bins: 1 },
            clip: 0.3,
            ..PilotSpec::default()
        };
        let fit = fit_pilot(&data, &spec).unwrap();
        assert!((fit.value(&[0.5]) - 1.0 / 0.7).abs() < 1e-12);
    }

    #[test]
    fn fitted_pilot_respects_bounds() {
        let data = toy_dataset(500, 11);
        for kind in [
            PilotKind::Regressogram { bins: 0 },
            PilotKind::SeriesLogistic { level: 2 },
        ] {
            let spec = PilotSpec {
                kind,
                ..PilotSpec::default()
            };
            let fit = fit_pilot(&data, &spec).unwrap();
            let grid = fit.to_grid(8);
            for &v in grid.values() {
                assert!(
                    (1.0..=1.0 / spec.clip + 1e-9).contains(&v),
                    "a_hat = {v} escapes [1, 1/clip]"
                );
            }
        }
    }

    #[test]
    fn regressogram_beats_constant_fit_on_wiggly_truth() {
        // truth 1/a0 = 0.6 psi(sin 2 pi z)... realized here through a rough
        // synthesized propensity; oracle errors computed by grid quadrature
        let spec = TruthSpec {
            alpha: 1.0,
            amp_a: 2.5,
            seed: 3,
            ..TruthSpec::default()
        };
        let truth = ModelTruth::synthesize(&spec).unwrap();
        let mut rng = rng::stream(8, &[tag::DATA]);
        let data = truth.simulate(4000, &mut rng);
        let fit = fit_pilot(
            &data,
            &PilotSpec {
                kind: PilotKind::Regressogram { bins: 16 },
                ..PilotSpec::default()
            },
        )
        .unwrap();
        let err = l2_error(&fit, &truth).unwrap();
        // constant competitor: the best constant is the F0-mean of a0
        let mean_a = truth
            .dist()
            .expect(&|z: &[f64]| truth.a0().value(z))
            .unwrap();
        let const_err = l2_error(&move |_: &[f64]| mean_a, &truth).unwrap();
        assert!(
            err < const_err,
            "regressogram {err} should beat constant {const_err}"
        );
    }

    #[test]
    fn logistic_pilot_tracks_a_smooth_truth() {
        let truth = ModelTruth::synthesize(&TruthSpec::default()).unwrap();
        let mut rng = rng::stream(21, &[tag::DATA]);
        let data = truth.simulate(3000, &mut rng);
        let fit = fit_pilot(
            &data,
            &PilotSpec {
                kind: PilotKind::SeriesLogistic { level: 2 },
                ..PilotSpec::default()
            },
        )
        .unwrap();
        let mean_a = truth
            .dist()
            .expect(&|z: &[f64]| truth.a0().value(z))
            .unwrap();
        let const_err = l2_error(&move |_: &[f64]| mean_a, &truth).unwrap();
        let err = l2_error(&fit, &truth).unwrap();
        assert!(err < const_err * 1.5, "logistic fit wildly off: {err}");
    }

    #[test]
    fn rate_probe_is_monotone_and_reproducible() {
        let truth = ModelTruth::synthesize(&TruthSpec::smooth(1.0, 1.0)).unwrap();
        let spec = PilotSpec::default();
        let rows = pilot_rate_probe(&truth, &spec, &[250, 1000, 4000], 5, 13).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(
            rows[2].median_l2_error <= rows[0].median_l2_error,
            "error should not grow with n: {rows:?}"
        );
        let again = pilot_rate_probe(&truth, &spec, &[250, 1000, 4000], 5, 13).unwrap();
        assert_eq!(rows, again);
    }

    #[test]
    fn rate_probe_constant_truth_hits_the_smoothing_floor() {
        // amp_a = 0 makes the propensity the constant 1/2; a single-cell
        // regressogram is then exact up to add-half smoothing noise
        let spec = TruthSpec {
            amp_a: 0.0,
            ..TruthSpec::default()
        };
        let truth = ModelTruth::synthesize(&spec).unwrap();
        let pilot = PilotSpec {
            kind: PilotKind::Regressogram { bins: 1 },
            ..PilotSpec::default()
        };
        let rows = pilot_rate_probe(&truth, &pilot, &[500, 2000], 3, 5).unwrap();
        // binomial sd of the cell rate is sqrt(1/(4n)); the error in a_hat is
        // ~4x that, so 12/sqrt(4n) is a generous 3-sigma bound
        for row in &rows {
            let bound = 12.0 / (4.0 * row.n as f64).sqrt();
            assert!(
                row.median_l2_error < bound,
                "constant truth should be easy: {row:?} (bound {bound})"
            );
        }
    }

    #[test]
    fn grid_export_matches_pointwise_eval() {
        let data = toy_dataset(200, 31);
        let fit = fit_pilot(&data, &PilotSpec::default()).unwrap();
        let grid = fit.to_grid(7);
        for idx in [0usize, 31, 77, 127] {
            let z = grid.center(idx);
            assert_eq!(grid.value(&z), fit.value(&z));
        }
        // the export is usable as a covariate-distribution-free Evaluable
        let _ = CovariateDist::Uniform { dim: 1 }
            .expect(&grid)
            .unwrap();
    }
}

//! Synthetic data-generating processes.
//!
//! A truth is the triple `(a0, b0, f0)` built from seeded Holder syntheses:
//! the propensity and regression are squashed through the logistic link into
//! `(margin, 1 - margin)`, the covariate density is an exponentiated
//! synthesis (or uniform at zero amplitude). Everything is tabulated on a
//! dyadic grid, so the efficient summary computed by quadrature is exact for
//! the piecewise-constant truth.

use rand::Rng;

use crate::error::Result;
use crate::funcspace::{
    synthesize_holder, Evaluable, GridFunction, HolderSynthesisSpec, Points, WaveletBasis,
};
use crate::model::{
    efficient_influence, efficient_variance, psi, CovariateDist, Dataset, EfficientSummary,
    Observation, ParamTriple,
};
use crate::rng::{derive, tag};

/// Smoothness labels, seeds and amplitudes describing a synthetic truth.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TruthSpec {
    /// Holder smoothness of the inverse propensity score.
    pub alpha: f64,
    /// Holder smoothness of the regression function.
    pub beta: f64,
    /// Holder smoothness of the log covariate density.
    pub gamma: f64,
    pub amp_a: f64,
    pub amp_b: f64,
    /// Zero amplitude means the uniform covariate distribution.
    pub amp_f: f64,
    pub seed: u64,
    /// Margin `delta`: `1/a0` and `b0` stay inside `(delta, 1 - delta)`.
    pub margin: f64,
    pub dim: usize,
    /// Tabulation level of the truth.
    pub grid_level: u32,
    /// Deepest wavelet level used by the syntheses.
    pub synth_max_level: u32,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 2.0,
            gamma: 1.0,
            amp_a: 1.5,
            amp_b: 1.2,
            amp_f: 0.0,
            seed: 7,
            margin: 0.05,
            dim: 1,
            grid_level: 10,
            synth_max_level: 8,
        }
    }
}

impl TruthSpec {
    pub fn smooth(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// An evaluable truth `(a0, b0, f0)` with its efficient summary.
#[derive(Debug, Clone)]
pub struct ModelTruth {
    spec: TruthSpec,
    prop0: GridFunction,
    a0: GridFunction,
    b0: GridFunction,
    f0: Option<GridFunction>,
    /// Cumulative cell masses for sampling Z when a density is present.
    cdf: Option<Vec<f64>>,
    summary: EfficientSummary,
}

impl ModelTruth {
    pub fn synthesize(spec: &TruthSpec) -> Result<Self> {
        assert!(
            spec.margin > 0.0 && spec.margin < 0.5,
            "margin must lie in (0, 0.5)"
        );
        let basis = WaveletBasis::haar(spec.dim, spec.synth_max_level);
        let synth = |s: f64, amp: f64, t: u64| {
            synthesize_holder(
                &HolderSynthesisSpec {
                    smoothness: s,
                    seed: derive(spec.seed, &[t]),
                    amplitude: amp,
                    basis: basis.clone(),
                },
                spec.grid_level,
            )
        };
        let squash = |g: GridFunction, m: f64| g.map(|v| m + (1.0 - 2.0 * m) * psi(v));
        let prop0 = squash(synth(spec.alpha, spec.amp_a, tag::TRUTH_A)?, spec.margin);
        let b0 = squash(synth(spec.beta, spec.amp_b, tag::TRUTH_B)?, spec.margin);
        let a0 = prop0.clone().map(|p| 1.0 / p);
        let f0 = if spec.amp_f == 0.0 {
            None
        } else {
            let h = synth(spec.gamma, spec.amp_f, tag::TRUTH_F)?;
            let max = h.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e = h.map(|v| (v - max).exp());
            let total = e.integral();
            Some(e.map(|v| v / total))
        };
        let cdf = f0.as_ref().map(|f| {
            let m = f.num_cells() as f64;
            let mut acc = 0.0;
            f.values()
                .iter()
                .map(|v| {
                    acc += v / m;
                    acc
                })
                .collect()
        });
        let truth = Self {
            spec: spec.clone(),
            prop0,
            a0,
            b0,
            f0,
            cdf,
            summary: EfficientSummary {
                chi: 0.0,
                var_b_part: 0.0,
                var_f_part: 0.0,
            },
        };
        let summary = efficient_variance(&truth.params())?;
        Ok(Self { summary, ..truth })
    }

    pub fn spec(&self) -> &TruthSpec {
        &self.spec
    }

    pub fn a0(&self) -> &GridFunction {
        &self.a0
    }

    pub fn b0(&self) -> &GridFunction {
        &self.b0
    }

    /// The true propensity score `1/a0`.
    pub fn propensity(&self) -> &GridFunction {
        &self.prop0
    }

    pub fn f0(&self) -> Option<&GridFunction> {
        self.f0.as_ref()
    }

    pub fn dist(&self) -> CovariateDist {
        match &self.f0 {
            Some(f) => CovariateDist::Density(f.clone()),
            None => CovariateDist::Uniform {
                dim: self.spec.dim,
            },
        }
    }

    pub fn params(&self) -> ParamTriple {
        ParamTriple {
            a: std::sync::Arc::new(self.a0.clone()),
            b: std::sync::Arc::new(self.b0.clone()),
            dist: self.dist(),
        }
    }

    pub fn chi(&self) -> f64 {
        self.summary.chi
    }

    pub fn efficient(&self) -> &EfficientSummary {
        &self.summary
    }

    /// Efficient influence function of this truth at one observation.
    pub fn influence(&self, obs: Observation<'_>) -> f64 {
        efficient_influence(obs, &self.a0, &self.b0, self.summary.chi)
    }

    fn sample_z(&self, rng: &mut impl Rng, out: &mut [f64]) {
        match (&self.cdf, &self.f0) {
            (Some(cdf), Some(f)) => {
                let u: f64 = rng.random();
                let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
                let center = f.center(idx);
                let h = 1.0 / (1u64 << f.level()) as f64;
                for (o, c) in out.iter_mut().zip(center) {
                    *o = (c + h * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
                }
            }
            _ => {
                for o in out.iter_mut() {
                    *o = rng.random();
                }
            }
        }
    }

    /// Draws `n` i.i.d. observations `(Z, R, R*Y)` from the truth.
    pub fn simulate(&self, n: usize, rng: &mut impl Rng) -> Dataset {
        let dim = self.spec.dim;
        let mut coords = Vec::with_capacity(n * dim);
        let mut r = Vec::with_capacity(n);
        let mut ry = Vec::with_capacity(n);
        let mut z = [0.0; 2];
        for _ in 0..n {
            self.sample_z(rng, &mut z[..dim]);
            let zi = &z[..dim];
            let ri = rng.random::<f64>() < self.prop0.value(zi);
            let yi = rng.random::<f64>() < self.b0.value(zi);
            coords.extend_from_slice(zi);
            r.push(ri);
            ry.push(ri && yi);
        }
        let pts = Points::new(dim, coords).expect("simulated points in range");
        Dataset::new(pts, r, ry).expect("simulated indicators consistent")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::mean_var;
    use crate::model::aipw_estimate;
    use crate::rng;

    #[test]
    fn truth_respects_margins() {
        let truth = ModelTruth::synthesize(&TruthSpec::default()).unwrap();
        truth.params().validate(1e-3, 1e-3, 8).unwrap();
        let d = 0.05 - 1e-12;
        assert!(truth
            .propensity()
            .values()
            .iter()
            .all(|&p| p > d && p < 1.0 - d));
    }

    #[test]
    fn density_truth_normalizes_and_samples_in_range() {
        let spec = TruthSpec {
            amp_f: 1.0,
            gamma: 0.5,
            ..TruthSpec::default()
        };
        let truth = ModelTruth::synthesize(&spec).unwrap();
        let f = truth.f0().unwrap();
        assert!((f.integral() - 1.0).abs() < 1e-10);
        let mut rng = rng::stream(3, &[rng::tag::DATA]);
        let data = truth.simulate(2000, &mut rng);
        assert_eq!(data.len(), 2000);
    }

    #[test]
    fn influence_is_mean_zero_under_the_truth() {
        let truth = ModelTruth::synthesize(&TruthSpec::smooth(1.0, 1.0).with_seed(7)).unwrap();
        let var = truth.efficient().var_eff();
        for (m, seed) in [(10_000usize, 1u64), (100_000, 2)] {
            let mut rng = rng::stream(seed, &[rng::tag::DATA]);
            let data = truth.simulate(m, &mut rng);
            let vals: Vec<f64> = data.iter().map(|o| truth.influence(o)).collect();
            let (mean, _) = mean_var(&vals);
            let tol = 4.0 * (var / m as f64).sqrt();
            assert!(
                mean.abs() <= tol,
                "m = {m}: |mean| = {} > {tol}",
                mean.abs()
            );
        }
    }

    #[test]
    fn efficient_variance_matches_monte_carlo_at_1e6() {
        let truth = ModelTruth::synthesize(&TruthSpec::smooth(1.0, 1.0).with_seed(7)).unwrap();
        let mut rng = rng::stream(11, &[rng::tag::DATA]);
        let data = truth.simulate(1_000_000, &mut rng);
        let vals: Vec<f64> = data.iter().map(|o| truth.influence(o)).collect();
        let (_, mc_var) = mean_var(&vals);
        let var = truth.efficient().var_eff();
        assert!(
            (mc_var - var).abs() / var < 0.02,
            "quadrature {var} vs Monte Carlo {mc_var}"
        );
    }

    #[test]
    fn aipw_with_true_regression_is_consistent() {
        // b_hat = b0 exactly, a_hat arbitrary bounded: estimate -> chi0
        let truth = ModelTruth::synthesize(&TruthSpec::smooth(1.0, 1.0).with_seed(5)).unwrap();
        let n = 10_000;
        let mut rng = rng::stream(17, &[rng::tag::DATA]);
        let data = truth.simulate(n, &mut rng);
        let a_hat = |z: &[f64]| 1.0 + 2.0 * z[0];
        let est = aipw_estimate(&data, &a_hat, truth.b0());
        // the integrand with b_hat = b0 has variance at most var_eff-ish;
        // bound the MC sd empirically
        let vals: Vec<f64> = data
            .iter()
            .map(|o| {
                let bz = truth.b0().value(o.z);
                let y = if o.ry { 1.0 } else { 0.0 };
                if o.r {
                    a_hat(o.z) * (y - bz) + bz
                } else {
                    bz
                }
            })
            .collect();
        let (_, v) = mean_var(&vals);
        let tol = 3.0 * (v / n as f64).sqrt();
        assert!(
            (est - truth.chi()).abs() <= tol,
            "est {est} vs chi0 {} (tol {tol})",
            truth.chi()
        );
    }

    #[test]
    fn simulation_is_deterministic_given_seed() {
        let truth = ModelTruth::synthesize(&TruthSpec::default()).unwrap();
        let mut r1 = rng::stream(9, &[rng::tag::DATA]);
        let mut r2 = rng::stream(9, &[rng::tag::DATA]);
        let d1 = truth.simulate(50, &mut r1);
        let d2 = truth.simulate(50, &mut r2);
        for (a, b) in d1.iter().zip(d2.iter()) {
            assert_eq!(a.z, b.z);
            assert_eq!(a.r, b.r);
            assert_eq!(a.ry, b.ry);
        }
    }
}

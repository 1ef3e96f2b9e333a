//! Seeded synthesis of test functions with a prescribed Holder smoothness,
//! built as wavelet series with the Besov-ball coefficient decay
//! `|c_{jk}| <= amplitude * 2^{-j(s + d/2)}`.

use rand::Rng;

use crate::error::Result;
use crate::funcspace::grid::GridFunction;
use crate::funcspace::wavelet::WaveletBasis;
use crate::rng;

#[derive(Debug, Clone)]
pub struct HolderSynthesisSpec {
    /// Smoothness exponent `s > 0`.
    pub smoothness: f64,
    pub seed: u64,
    pub amplitude: f64,
    pub basis: WaveletBasis,
}

/// Draws coefficients `c_{jk} = amplitude * 2^{-j(s + d/2)} * u_{jk}` with
/// `u_{jk} ~ U[-1,1]` from the seeded stream (levels ascending, `k` ascending)
/// and returns the series tabulated at `level`. Deterministic in
/// `(seed, spec)`.
pub fn synthesize_holder(spec: &HolderSynthesisSpec, level: u32) -> Result<GridFunction> {
    assert!(spec.smoothness > 0.0, "smoothness must be positive");
    let basis = &spec.basis;
    let d = basis.dim();
    let mut rng = rng::stream(spec.seed, &[]);
    let mut out = GridFunction::constant(level, d, 0.0);
    if spec.amplitude == 0.0 {
        return Ok(out);
    }
    let centers = out.centers();
    for j in 1..=basis.max_level() {
        let decay = spec.amplitude * 2.0f64.powf(-(j as f64) * (spec.smoothness + d as f64 / 2.0));
        for k in 0..basis.level_count(j) {
            let u: f64 = rng.random_range(-1.0..=1.0);
            let c = decay * u;
            if c == 0.0 {
                continue;
            }
            let values = out.values_mut();
            for (idx, z) in centers.iter().enumerate() {
                values[idx] += c * basis.evaluate_unchecked(j, k, z);
            }
        }
    }
    Ok(out)
}

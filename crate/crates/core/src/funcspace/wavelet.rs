//! Orthonormal wavelet systems on `[0,1]^d`.
//!
//! Level `j >= 1` holds `2^{jd}` functions. In one dimension these are the
//! scale-`j` wavelets `psi_{jk}(x) = 2^{j/2} psi(2^j x - k)`, `k = 0..2^j-1`;
//! for `d = 2` the level-`j` system is the tensor product of two same-level
//! 1-d wavelets, indexed by the flat multi-index `k = k1 * 2^j + k2`.
//!
//! Haar wavelets are evaluated in closed form. The Daubechies-4 family is
//! realized from its filter coefficients as the periodized discrete wavelet
//! basis at a working grid level, represented by step functions; this keeps
//! the system exactly orthonormal under midpoint quadrature at that level.

use crate::error::{Error, Result};
use crate::funcspace::grid::GridFunction;
use crate::math::KahanSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WaveletFamily {
    Haar,
    Daubechies4,
}

/// Daubechies-4 low-pass filter.
const D4: [f64; 4] = {
    // (1 +- sqrt(3)) / (4 sqrt(2)) family; spelled out to stay const
    [
        0.482_962_913_144_690_2,
        0.836_516_303_737_469,
        0.224_143_868_041_857_35,
        -0.129_409_522_550_921_44,
    ]
};

#[derive(Debug, Clone)]
pub struct WaveletBasis {
    family: WaveletFamily,
    dim: usize,
    max_level: u32,
    work_level: u32,
    /// 1-d tabulations at `work_level` for filter-bank families,
    /// indexed by `offset(j) + k`. Empty for Haar.
    tables: Vec<Vec<f64>>,
}

impl WaveletBasis {
    pub fn haar(dim: usize, max_level: u32) -> Self {
        Self {
            family: WaveletFamily::Haar,
            dim,
            max_level,
            work_level: max_level + 2,
            tables: Vec::new(),
        }
    }

    pub fn new(family: WaveletFamily, dim: usize, max_level: u32) -> Result<Self> {
        let work_level = (max_level + 6).max(12);
        Self::with_work_level(family, dim, max_level, work_level)
    }

    /// `work_level` is the tabulation resolution for filter-bank families and
    /// the grid level at which orthonormality is exact.
    pub fn with_work_level(
        family: WaveletFamily,
        dim: usize,
        max_level: u32,
        work_level: u32,
    ) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::Config(format!("dim must be 1 or 2, got {dim}")));
        }
        if max_level == 0 {
            return Err(Error::Config("max_level must be >= 1".into()));
        }
        if work_level <= max_level {
            return Err(Error::Config(
                "work_level must exceed max_level for tabulation".into(),
            ));
        }
        let tables = match family {
            WaveletFamily::Haar => Vec::new(),
            WaveletFamily::Daubechies4 => build_filter_tables(&D4, max_level, work_level),
        };
        Ok(Self {
            family,
            dim,
            max_level,
            work_level,
            tables,
        })
    }

    pub fn family(&self) -> WaveletFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Number of basis functions at level `j`: `2^{jd}`.
    pub fn level_count(&self, j: u32) -> usize {
        1usize << (j as usize * self.dim)
    }

    /// Total number of basis functions on levels `1..=j_max`.
    pub fn count_up_to(&self, j_max: u32) -> usize {
        (1..=j_max).map(|j| self.level_count(j)).sum()
    }

    fn check_index(&self, j: u32, k: usize) -> Result<()> {
        if j == 0 || j > self.max_level {
            return Err(Error::IndexOutOfRange(format!(
                "level {j} outside 1..={}",
                self.max_level
            )));
        }
        if k >= self.level_count(j) {
            return Err(Error::IndexOutOfRange(format!(
                "k = {k} at level {j} (size {})",
                self.level_count(j)
            )));
        }
        Ok(())
    }

    /// Evaluates `psi_{jk}` at `z`. For `d = 2` the flat multi-index is
    /// `k = k1 * 2^j + k2`.
    pub fn evaluate(&self, j: u32, k: usize, z: &[f64]) -> Result<f64> {
        self.check_index(j, k)?;
        if z.len() != self.dim {
            return Err(Error::Config(format!(
                "point dim {} vs basis dim {}",
                z.len(),
                self.dim
            )));
        }
        Ok(self.evaluate_unchecked(j, k, z))
    }

    #[inline]
    pub(crate) fn evaluate_unchecked(&self, j: u32, k: usize, z: &[f64]) -> f64 {
        match self.dim {
            1 => self.eval_axis(j, k, z[0]),
            _ => {
                let per = 1usize << j;
                self.eval_axis(j, k / per, z[0]) * self.eval_axis(j, k % per, z[1])
            }
        }
    }

    #[inline]
    fn eval_axis(&self, j: u32, k: usize, x: f64) -> f64 {
        match self.family {
            WaveletFamily::Haar => {
                let scale = (1u64 << j) as f64;
                // z = 1 belongs to the last cell, matching grid lookup
                let t = scale * x.min(1.0 - 1e-15) - k as f64;
                if !(0.0..1.0).contains(&t) {
                    0.0
                } else if t < 0.5 {
                    scale.sqrt()
                } else {
                    -scale.sqrt()
                }
            }
            WaveletFamily::Daubechies4 => {
                let table = &self.tables[table_offset(j) + k];
                let m = table.len();
                let cell = ((x * m as f64) as usize).min(m - 1);
                table[cell]
            }
        }
    }

    /// Tabulates `psi_{jk}` on the dyadic grid at `level`.
    pub fn tabulate(&self, j: u32, k: usize, level: u32) -> Result<GridFunction> {
        self.check_index(j, k)?;
        let per_axis = 1usize << level;
        let m = per_axis.pow(self.dim as u32);
        let h = 1.0 / per_axis as f64;
        let mut values = Vec::with_capacity(m);
        if self.dim == 1 {
            for i in 0..m {
                values.push(self.eval_axis(j, k, (i as f64 + 0.5) * h));
            }
        } else {
            let per = 1usize << j;
            for i1 in 0..per_axis {
                let v1 = self.eval_axis(j, k / per, (i1 as f64 + 0.5) * h);
                for i2 in 0..per_axis {
                    values.push(v1 * self.eval_axis(j, k % per, (i2 as f64 + 0.5) * h));
                }
            }
        }
        GridFunction::new(level, self.dim, values)
    }

    /// `L^2` inner product of a grid function with `psi_{jk}` by midpoint
    /// quadrature at the grid's own level. Exact for Haar when the grid level
    /// is at least `j + 1`.
    pub fn inner_product(&self, f: &GridFunction, j: u32, k: usize) -> Result<f64> {
        self.check_index(j, k)?;
        if f.dim() != self.dim {
            return Err(Error::Config("grid dim vs basis dim".into()));
        }
        let psi = self.tabulate(j, k, f.level())?;
        let mut acc = KahanSum::new();
        for (a, b) in f.values().iter().zip(psi.values()) {
            acc.add(a * b);
        }
        Ok(acc.value() / f.num_cells() as f64)
    }
}

fn table_offset(j: u32) -> usize {
    // levels are 1-based: offset(1) = 0, offset(j) = 2 + 4 + ... + 2^{j-1}
    (2usize << (j - 1)) - 2
}

/// One periodic synthesis step of an orthogonal 4-tap filter bank:
/// approx+detail of length `M` to a signal of length `2M`.
fn synth_step(approx: &[f64], detail: &[f64], h: &[f64; 4]) -> Vec<f64> {
    let m2 = approx.len() * 2;
    let mut s = vec![0.0; m2];
    for i in 0..approx.len() {
        for (t, &ht) in h.iter().enumerate() {
            let g = if t % 2 == 0 { h[3 - t] } else { -h[3 - t] };
            s[(2 * i + t) % m2] += ht * approx[i] + g * detail[i];
        }
    }
    s
}

/// Builds the 1-d wavelet step functions at `work_level` by synthesizing a
/// unit detail coefficient through the periodic filter bank and rescaling by
/// `sqrt(m)` so the step function has unit `L^2` norm.
fn build_filter_tables(h: &[f64; 4], max_level: u32, work_level: u32) -> Vec<Vec<f64>> {
    let m = 1usize << work_level;
    let mut tables = Vec::with_capacity(table_offset(max_level) + (1 << max_level));
    let scale = (m as f64).sqrt();
    for j in 1..=max_level {
        let size = 1usize << j;
        for k in 0..size {
            let approx = vec![0.0; size];
            let mut detail = vec![0.0; size];
            detail[k] = 1.0;
            let mut sig = synth_step(&approx, &detail, h);
            while sig.len() < m {
                let zeros = vec![0.0; sig.len()];
                sig = synth_step(&sig, &zeros, h);
            }
            for v in &mut sig {
                *v *= scale;
            }
            tables.push(sig);
        }
    }
    tables
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::grid::quadrature;

    #[test]
    fn haar_level_one_values() {
        let basis = WaveletBasis::haar(1, 4);
        let amp = 2.0f64.sqrt();
        assert!((basis.evaluate(1, 0, &[0.1]).unwrap() - amp).abs() < 1e-12);
        assert!((basis.evaluate(1, 0, &[0.35]).unwrap() + amp).abs() < 1e-12);
        // support of psi_{1,0} is [0, 1/2); the second half-interval belongs
        // to k = 1
        assert_eq!(basis.evaluate(1, 0, &[0.6]).unwrap(), 0.0);
        assert!((basis.evaluate(1, 1, &[0.6]).unwrap() - amp).abs() < 1e-12);
    }

    #[test]
    fn haar_is_normalized_on_fine_grid() {
        let basis = WaveletBasis::haar(1, 4);
        let sq = basis.tabulate(2, 1, 16).unwrap().map(|v| v * v);
        assert!((quadrature(&sq, None).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn haar_cross_level_orthogonality() {
        let basis = WaveletBasis::haar(1, 4);
        let a = basis.tabulate(1, 0, 16).unwrap();
        let prod = basis.inner_product(&a, 2, 1).unwrap();
        assert!(prod.abs() < 1e-6);
    }

    fn gram_is_identity(basis: &WaveletBasis, grid_level: u32, tol: f64) {
        let mut fns = Vec::new();
        for j in 1..=basis.max_level() {
            for k in 0..basis.level_count(j) {
                fns.push(basis.tabulate(j, k, grid_level).unwrap());
            }
        }
        let m = fns[0].num_cells() as f64;
        for (p, fp) in fns.iter().enumerate() {
            for (q, fq) in fns.iter().enumerate().skip(p) {
                let dot: f64 = fp
                    .values()
                    .iter()
                    .zip(fq.values())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / m;
                let expect = if p == q { 1.0 } else { 0.0 };
                assert!(
                    (dot - expect).abs() < tol,
                    "gram[{p},{q}] = {dot}, expected {expect}"
                );
            }
        }
    }

    #[test]
    fn haar_gram_identity_up_to_level_4() {
        gram_is_identity(&WaveletBasis::haar(1, 4), 16, 1e-6);
    }

    #[test]
    fn daubechies4_gram_identity_up_to_level_4() {
        let basis = WaveletBasis::with_work_level(WaveletFamily::Daubechies4, 1, 4, 16).unwrap();
        gram_is_identity(&basis, 16, 1e-6);
    }

    #[test]
    fn tensor_basis_is_orthonormal() {
        let basis = WaveletBasis::haar(2, 2);
        let a = basis.tabulate(1, 1, 8).unwrap();
        let sq = a.clone().map(|v| v * v);
        assert!((quadrature(&sq, None).unwrap() - 1.0).abs() < 1e-10);
        assert!(basis.inner_product(&a, 2, 5).unwrap().abs() < 1e-10);
        assert!(basis.inner_product(&a, 1, 2).unwrap().abs() < 1e-10);
    }

    #[test]
    fn index_checks() {
        let basis = WaveletBasis::haar(1, 3);
        assert!(basis.evaluate(0, 0, &[0.5]).is_err());
        assert!(basis.evaluate(4, 0, &[0.5]).is_err());
        assert!(basis.evaluate(2, 4, &[0.5]).is_err());
        assert!(basis.evaluate(2, 3, &[0.5]).is_ok());
    }
}

//! Cell-centered dyadic grids and midpoint quadrature.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::math::{ksum, KahanSum};

/// Anything that can be evaluated at a point of `[0,1]^d`.
///
/// Implemented by closures and by [`GridFunction`]; model parameters
/// (`a`, `b`, densities, pilot estimates) are passed around as `&dyn Evaluable`.
pub trait Evaluable: Sync {
    fn value(&self, z: &[f64]) -> f64;
}

impl<F> Evaluable for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn value(&self, z: &[f64]) -> f64 {
        self(z)
    }
}

/// A flat list of points in `[0,1]^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::Config(format!("dim must be 1 or 2, got {dim}")));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Config(format!(
                "coordinate buffer length {} not divisible by dim {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Domain("point outside [0,1]^d".into()));
        }
        Ok(Self { dim, coords })
    }

    /// 1-d convenience constructor.
    pub fn from_1d(xs: Vec<f64>) -> Result<Self> {
        Self::new(1, xs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn push(&mut self, z: &[f64]) {
        debug_assert_eq!(z.len(), self.dim);
        self.coords.extend_from_slice(z);
    }
}

/// A function on `[0,1]^d` stored as one value per cell of the dyadic grid
/// with `2^level` cells per axis (cell-center convention). Off-grid points
/// evaluate to the value of the containing cell, i.e. piecewise-constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    level: u32,
    dim: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(level: u32, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::Config(format!("dim must be 1 or 2, got {dim}")));
        }
        let expect = 1usize << (level as usize * dim);
        if values.len() != expect {
            return Err(Error::Config(format!(
                "grid at level {level}, dim {dim} needs {expect} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite grid value".into()));
        }
        Ok(Self { level, dim, values })
    }

    pub fn constant(level: u32, dim: usize, c: f64) -> Self {
        let m = 1usize << (level as usize * dim);
        Self::new(level, dim, vec![c; m]).expect("constant grid")
    }

    /// Tabulates `f` at the cell centers.
    pub fn from_fn(level: u32, dim: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let per_axis = 1usize << level;
        let m = per_axis.pow(dim as u32);
        let mut values = Vec::with_capacity(m);
        let h = 1.0 / per_axis as f64;
        let mut buf = [0.0; 2];
        for idx in 0..m {
            Self::center_of(idx, per_axis, dim, h, &mut buf);
            values.push(f(&buf[..dim]));
        }
        Self { level, dim, values }
    }

    fn center_of(idx: usize, per_axis: usize, dim: usize, h: f64, out: &mut [f64; 2]) {
        if dim == 1 {
            out[0] = (idx as f64 + 0.5) * h;
        } else {
            out[0] = ((idx / per_axis) as f64 + 0.5) * h;
            out[1] = ((idx % per_axis) as f64 + 0.5) * h;
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    /// Index of the cell containing `z`; `z = 1` belongs to the last cell.
    pub fn cell_index(&self, z: &[f64]) -> usize {
        debug_assert_eq!(z.len(), self.dim);
        let per_axis = 1usize << self.level;
        let mut idx = 0usize;
        for &x in z {
            let i = ((x * per_axis as f64) as usize).min(per_axis - 1);
            idx = idx * per_axis + i;
        }
        idx
    }

    /// Center of cell `idx`.
    pub fn center(&self, idx: usize) -> Vec<f64> {
        let per_axis = 1usize << self.level;
        let h = 1.0 / per_axis as f64;
        let mut buf = [0.0; 2];
        Self::center_of(idx, per_axis, self.dim, h, &mut buf);
        buf[..self.dim].to_vec()
    }

    /// All cell centers as a [`Points`] set.
    pub fn centers(&self) -> Points {
        let per_axis = 1usize << self.level;
        let h = 1.0 / per_axis as f64;
        let mut coords = Vec::with_capacity(self.values.len() * self.dim);
        let mut buf = [0.0; 2];
        for idx in 0..self.values.len() {
            Self::center_of(idx, per_axis, self.dim, h, &mut buf);
            coords.extend_from_slice(&buf[..self.dim]);
        }
        Points {
            dim: self.dim,
            coords,
        }
    }

    /// Midpoint-rule integral over `[0,1]^d`.
    pub fn integral(&self) -> f64 {
        ksum(self.values.iter().copied()) / self.values.len() as f64
    }

    pub fn map(mut self, f: impl Fn(f64) -> f64) -> Self {
        for v in &mut self.values {
            *v = f(*v);
        }
        self
    }

    /// Writes `level,dim` as a header record followed by one value per line.
    pub fn to_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,dim")?;
        writeln!(w, "{},{}", self.level, self.dim)?;
        writeln!(w, "value")?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn from_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("grid csv: {m}"));
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file"))?
            .map_err(|e| bad(&e.to_string()))?;
        if header.trim() != "level,dim" {
            return Err(bad("missing level,dim header"));
        }
        let meta = lines
            .next()
            .ok_or_else(|| bad("missing metadata row"))?
            .map_err(|e| bad(&e.to_string()))?;
        let mut it = meta.trim().split(',');
        let level: u32 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad level"))?;
        let dim: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad dim"))?;
        let col = lines
            .next()
            .ok_or_else(|| bad("missing value header"))?
            .map_err(|e| bad(&e.to_string()))?;
        if col.trim() != "value" {
            return Err(bad("missing value header"));
        }
        let mut values = Vec::new();
        for line in lines {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(t.parse::<f64>().map_err(|e| bad(&e.to_string()))?);
        }
        Self::new(level, dim, values)
    }
}

impl Evaluable for GridFunction {
    fn value(&self, z: &[f64]) -> f64 {
        self.values[self.cell_index(z)]
    }
}

fn check_weight(weight: &GridFunction) -> Result<()> {
    if weight.values().iter().any(|&w| w < 0.0) {
        return Err(Error::Normalization("negative weight value".into()));
    }
    let total = weight.integral();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Normalization(format!(
            "weight integrates to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Midpoint-rule integral of `f`, optionally against a normalized density
/// `weight` tabulated at the same level. Error is `O(2^{-2L})` for twice
/// differentiable integrands.
pub fn quadrature(f: &GridFunction, weight: Option<&GridFunction>) -> Result<f64> {
    match weight {
        None => Ok(f.integral()),
        Some(w) => {
            if w.level() != f.level() || w.dim() != f.dim() {
                return Err(Error::Config(
                    "weight grid must match integrand level and dim".into(),
                ));
            }
            check_weight(w)?;
            let mut acc = KahanSum::new();
            for (a, b) in f.values().iter().zip(w.values()) {
                acc.add(a * b);
            }
            Ok(acc.value() / f.num_cells() as f64)
        }
    }
}

/// Midpoint-rule integral of a closure evaluated at the cell centers of the
/// level-`level` grid.
pub fn quadrature_fn(
    level: u32,
    dim: usize,
    f: impl Fn(&[f64]) -> f64,
    weight: Option<&GridFunction>,
) -> Result<f64> {
    let g = GridFunction::from_fn(level, dim, f);
    quadrature(&g, weight)
}

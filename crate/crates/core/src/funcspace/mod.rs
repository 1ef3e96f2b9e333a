//! Function representations on `[0,1]^d`: dyadic cell-centered grids,
//! midpoint quadrature, Haar / Daubechies-4 wavelet bases and seeded
//! synthesis of functions with prescribed Holder smoothness.

mod grid;
mod synth;
mod wavelet;

pub use grid::{quadrature, quadrature_fn, Evaluable, GridFunction, Points};
pub use synth::{synthesize_holder, HolderSynthesisSpec};
pub use wavelet::{WaveletBasis, WaveletFamily};

//! Discrete Fourier machinery and the compatibility projection.
//!
//! The projection applied to a tensor field `W` is
//!
//! ```text
//! Ĝ(ξ) : Ŵ = ξ_j (ξ_l Ŵ_il) / ‖ξ‖²   (ξ ≠ 0),   0 at ξ = 0
//! ```
//!
//! The phase shift between voxel-centered and index-based transforms cancels
//! between the forward and inverse passes, so a standard FFT is used. Rows
//! `i = 1, 2` of the tensor are packed as real and imaginary parts of one complex
//! signal per column `l`, which is valid because `Ĝ` is real and does not mix `i`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::micro::field::FieldT2;
use crate::micro::problem::RveGrid;
use crate::tensor::Tensor2;

/// Integer wavenumber for FFT output slot `m` of an `n`-point transform.
pub fn integer_wavenumber(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Scaled wavenumbers `ξ = (π k1 / L1, π k2 / L2)` in FFT output order
/// (flat index `m1 * N2 + m2`).
pub fn wavenumbers(grid: &RveGrid) -> Vec<[f64; 2]> {
    let [n1, n2] = grid.n();
    let [l1, l2] = grid.half_len();
    let pi = std::f64::consts::PI;
    let mut out = Vec::with_capacity(n1 * n2);
    for m1 in 0..n1 {
        let xi1 = pi * integer_wavenumber(m1, n1) as f64 / l1;
        for m2 in 0..n2 {
            out.push([xi1, pi * integer_wavenumber(m2, n2) as f64 / l2]);
        }
    }
    out
}

/// Cached FFT plans plus the projection kernel for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: RveGrid,
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
    /// `ξ / ‖ξ‖` in transposed spectral layout (`m2 * N1 + m1`); zero at `ξ = 0`.
    unit_xi_t: Vec<[f64; 2]>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: &RveGrid) -> Self {
        let [n1, n2] = grid.n();
        let mut planner = FftPlanner::new();
        let fwd = [planner.plan_fft_forward(n1), planner.plan_fft_forward(n2)];
        let inv = [planner.plan_fft_inverse(n1), planner.plan_fft_inverse(n2)];
        let xi = wavenumbers(grid);
        let mut unit_xi_t = vec![[0.0; 2]; n1 * n2];
        for m1 in 0..n1 {
            for m2 in 0..n2 {
                let [a, b] = xi[m1 * n2 + m2];
                let norm = (a * a + b * b).sqrt();
                unit_xi_t[m2 * n1 + m1] = if norm > 0.0 {
                    [a / norm, b / norm]
                } else {
                    [0.0, 0.0]
                };
            }
        }
        Spectral {
            grid: *grid,
            fwd,
            inv,
            unit_xi_t,
        }
    }

    pub fn grid(&self) -> &RveGrid {
        &self.grid
    }

    /// 2D forward transform of a row-major buffer; result left transposed.
    fn forward_t(&self, data: &mut [Complex64], tmp: &mut [Complex64]) {
        let [n1, n2] = self.grid.n();
        self.fwd[1].process(data);
        transpose(data, tmp, n1, n2);
        self.fwd[0].process(tmp);
    }

    /// Inverse of [`Self::forward_t`], including the `1/|N|` normalization.
    fn inverse_t(&self, tmp: &mut [Complex64], data: &mut [Complex64]) {
        let [n1, n2] = self.grid.n();
        self.inv[0].process(tmp);
        transpose(tmp, data, n2, n1);
        self.inv[1].process(data);
        let scale = 1.0 / (n1 * n2) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Computes `𝔾 ∗ W`.
    pub fn project(&self, field: &FieldT2) -> FieldT2 {
        let mut out = field.clone();
        self.project_into(field, &mut out);
        out
    }

    /// Computes `𝔾 ∗ W` into `out`, reusing its storage.
    pub fn project_into(&self, field: &FieldT2, out: &mut FieldT2) {
        let n = self.grid.voxel_count();
        let src = field.as_slice();
        let mut cols = [
            vec![Complex64::new(0.0, 0.0); n],
            vec![Complex64::new(0.0, 0.0); n],
        ];
        let mut spec = [
            vec![Complex64::new(0.0, 0.0); n],
            vec![Complex64::new(0.0, 0.0); n],
        ];
        for (l, col) in cols.iter_mut().enumerate() {
            for (c, t) in col.iter_mut().zip(src) {
                *c = Complex64::new(t[(0, l)], t[(1, l)]);
            }
        }
        for l in 0..2 {
            self.forward_t(&mut cols[l], &mut spec[l]);
        }
        let (s0, s1) = spec.split_at_mut(1);
        for ((z0, z1), e) in s0[0].iter_mut().zip(s1[0].iter_mut()).zip(&self.unit_xi_t) {
            let proj = *z0 * e[0] + *z1 * e[1];
            *z0 = proj * e[0];
            *z1 = proj * e[1];
        }
        for l in 0..2 {
            self.inverse_t(&mut spec[l], &mut cols[l]);
        }
        for (idx, t) in out.as_mut_slice().iter_mut().enumerate() {
            *t = Tensor2::from_rows([
                [cols[0][idx].re, cols[1][idx].re],
                [cols[0][idx].im, cols[1][idx].im],
            ]);
        }
    }

    /// Full complex DFT of each component, in FFT output order (`m1 * N2 + m2`).
    /// Returned as `[Ŵ11, Ŵ12, Ŵ21, Ŵ22]`.
    pub fn transform(&self, field: &FieldT2) -> [Vec<Complex64>; 4] {
        let [n1, n2] = self.grid.n();
        let n = n1 * n2;
        let mut out: [Vec<Complex64>; 4] = Default::default();
        for (comp, slot) in out.iter_mut().enumerate() {
            let mut data: Vec<Complex64> = field
                .iter()
                .map(|t| Complex64::new(t.flatten()[comp], 0.0))
                .collect();
            let mut tmp = vec![Complex64::new(0.0, 0.0); n];
            self.forward_t(&mut data, &mut tmp);
            transpose(&tmp, &mut data, n2, n1);
            *slot = data;
        }
        out
    }
}

/// Out-of-place transpose of a `rows × cols` row-major matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

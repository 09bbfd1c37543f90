//! Dense second- and fourth-order tensors in two spatial dimensions.
//!
//! Second-order tensors flatten row-major to `(F11, F12, F21, F22)`; the same
//! ordering indexes the rows and columns of [`Tensor4`] viewed as a 4×4 matrix,
//! so `C[(i, j, k, l)]` lives at `matrix[2i + j][2k + l]`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude a determinant is treated as zero by [`inv2`].
pub const SINGULAR_DET: f64 = 1e-12;

/// Second-order tensor with 2×2 entries.
#[derive(Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor2([[f64; 2]; 2]);

/// Fourth-order tensor stored as a 4×4 matrix over flattened index pairs.
#[derive(Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor4([[f64; 4]; 4]);

/// Flattened second-order tensor in the canonical `(F11, F12, F21, F22)` order.
pub type FlatVec4 = [f64; 4];

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2([[0.0; 2]; 2]);
    pub const IDENTITY: Tensor2 = Tensor2([[1.0, 0.0], [0.0, 1.0]]);

    /// Builds a tensor from rows, rejecting non-finite entries.
    pub fn try_from_rows(rows: [[f64; 2]; 2]) -> Result<Self> {
        if rows.iter().flatten().all(|v| v.is_finite()) {
            Ok(Tensor2(rows))
        } else {
            Err(Error::invalid(format!(
                "non-finite tensor entries {rows:?}"
            )))
        }
    }

    /// Builds a tensor from rows. Callers guarantee finiteness.
    pub const fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Tensor2(rows)
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Tensor2([[a, 0.0], [0.0, b]])
    }

    /// Unit tensor `E_kl` with a single one at `(k, l)`.
    pub fn unit(k: usize, l: usize) -> Self {
        let mut t = Tensor2::ZERO;
        t.0[k][l] = 1.0;
        t
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        self.0
    }

    pub fn flatten(&self) -> FlatVec4 {
        [self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]]
    }

    pub fn unflatten(v: FlatVec4) -> Self {
        Tensor2([[v[0], v[1]], [v[2], v[3]]])
    }

    pub fn det(&self) -> f64 {
        det2(self)
    }

    pub fn transpose(&self) -> Self {
        Tensor2([[self.0[0][0], self.0[1][0]], [self.0[0][1], self.0[1][1]]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Double contraction `A : B = A_ij B_ij`.
    pub fn ddot(&self, other: &Tensor2) -> f64 {
        let (a, b) = (self.flatten(), other.flatten());
        a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.flatten().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Matrix product `A · B`.
    pub fn dot(&self, other: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = self.0[i][0] * other.0[0][j] + self.0[i][1] * other.0[1][j];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl fmt::Debug for Tensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor2({:?})", self.0)
    }
}

impl fmt::Display for Tensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{:.10e}, {:.10e}], [{:.10e}, {:.10e}]]",
            self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]
        )
    }
}

impl Index<(usize, usize)> for Tensor2 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Tensor2 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(mut self, rhs: Tensor2) -> Tensor2 {
        self += rhs;
        self
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, rhs: Tensor2) {
        for i in 0..2 {
            for j in 0..2 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(mut self, rhs: Tensor2) -> Tensor2 {
        self -= rhs;
        self
    }
}

impl SubAssign for Tensor2 {
    fn sub_assign(&mut self, rhs: Tensor2) {
        for i in 0..2 {
            for j in 0..2 {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        self * -1.0
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(mut self, s: f64) -> Tensor2 {
        for row in self.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        self
    }
}

impl Tensor4 {
    pub const ZERO: Tensor4 = Tensor4([[0.0; 4]; 4]);

    /// Fourth-order identity `I_ijkl = δ_ik δ_jl`, so that `I : t = t`.
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            row[r] = 1.0;
        }
        Tensor4(m)
    }

    pub const fn from_matrix(m: [[f64; 4]; 4]) -> Self {
        Tensor4(m)
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest violation of major symmetry, `max |C_ijkl - C_klij|`.
    pub fn major_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                worst = worst.max((self.0[r][c] - self.0[c][r]).abs());
            }
        }
        worst
    }

    /// Sets column `(k, l)` to the tensor `t`, i.e. `C_ijkl = t_ij`.
    pub fn set_column(&mut self, k: usize, l: usize, t: &Tensor2) {
        let col = 2 * k + l;
        for (r, v) in t.flatten().into_iter().enumerate() {
            self.0[r][col] = v;
        }
    }

    pub fn column(&self, k: usize, l: usize) -> Tensor2 {
        let col = 2 * k + l;
        Tensor2::unflatten([
            self.0[0][col],
            self.0[1][col],
            self.0[2][col],
            self.0[3][col],
        ])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl fmt::Debug for Tensor4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor4({:?})", self.0)
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (i, j, k, l): (usize, usize, usize, usize)) -> &f64 {
        &self.0[2 * i + j][2 * k + l]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (i, j, k, l): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.0[2 * i + j][2 * k + l]
    }
}

impl Add for Tensor4 {
    type Output = Tensor4;
    fn add(mut self, rhs: Tensor4) -> Tensor4 {
        self += rhs;
        self
    }
}

impl AddAssign for Tensor4 {
    fn add_assign(&mut self, rhs: Tensor4) {
        for r in 0..4 {
            for c in 0..4 {
                self.0[r][c] += rhs.0[r][c];
            }
        }
    }
}

impl Sub for Tensor4 {
    type Output = Tensor4;
    fn sub(mut self, rhs: Tensor4) -> Tensor4 {
        for r in 0..4 {
            for c in 0..4 {
                self.0[r][c] -= rhs.0[r][c];
            }
        }
        self
    }
}

impl Mul<f64> for Tensor4 {
    type Output = Tensor4;
    fn mul(mut self, s: f64) -> Tensor4 {
        for v in self.0.iter_mut().flatten() {
            *v *= s;
        }
        self
    }
}

/// `F11 F22 - F12 F21`.
pub fn det2(t: &Tensor2) -> f64 {
    t.0[0][0] * t.0[1][1] - t.0[0][1] * t.0[1][0]
}

/// Inverse of a 2×2 tensor; fails when `|det| <= 1e-12`.
pub fn inv2(t: &Tensor2) -> Result<Tensor2> {
    let det = det2(t);
    if det.abs() <= SINGULAR_DET || !det.is_finite() {
        return Err(Error::SingularTensor { det });
    }
    let inv_det = 1.0 / det;
    Ok(Tensor2([
        [t.0[1][1] * inv_det, -t.0[0][1] * inv_det],
        [-t.0[1][0] * inv_det, t.0[0][0] * inv_det],
    ]))
}

/// Double contraction `(C : t)_ij = C_ijkl t_kl`.
pub fn ddot42(c: &Tensor4, t: &Tensor2) -> Tensor2 {
    let v = t.flatten();
    let mut out = [0.0; 4];
    for (r, o) in out.iter_mut().enumerate() {
        *o = c.0[r][0] * v[0] + c.0[r][1] * v[1] + c.0[r][2] * v[2] + c.0[r][3] * v[3];
    }
    Tensor2::unflatten(out)
}

/// Left contraction `(t : C)_kl = t_ij C_ijkl`.
pub fn ddot24(t: &Tensor2, c: &Tensor4) -> Tensor2 {
    let v = t.flatten();
    let mut out = [0.0; 4];
    for (col, o) in out.iter_mut().enumerate() {
        *o = (0..4).map(|r| v[r] * c.0[r][col]).sum();
    }
    Tensor2::unflatten(out)
}

/// Fourth-order product `(A : B)_ijkl = A_ijmn B_mnkl`.
pub fn ddot44(a: &Tensor4, b: &Tensor4) -> Tensor4 {
    let mut out = [[0.0; 4]; 4];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (0..4).map(|m| a.0[r][m] * b.0[m][c]).sum();
        }
    }
    Tensor4(out)
}

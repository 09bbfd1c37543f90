use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::micro::problem::RveGrid;
use crate::tensor::Tensor2;

/// Grid function of second-order tensors, stored in [`RveGrid::index`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldT2 {
    n: [usize; 2],
    data: Vec<Tensor2>,
}

impl FieldT2 {
    pub fn constant(grid: &RveGrid, value: Tensor2) -> Self {
        FieldT2 {
            n: grid.n(),
            data: vec![value; grid.voxel_count()],
        }
    }

    pub fn zeros(grid: &RveGrid) -> Self {
        Self::constant(grid, Tensor2::ZERO)
    }

    pub fn from_vec(grid: &RveGrid, data: Vec<Tensor2>) -> Result<Self> {
        if data.len() != grid.voxel_count() {
            return Err(Error::invalid(format!(
                "field has {} voxels, grid has {}",
                data.len(),
                grid.voxel_count()
            )));
        }
        Ok(FieldT2 { n: grid.n(), data })
    }

    pub fn shape(&self) -> [usize; 2] {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Tensor2] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Tensor2] {
        &mut self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor2> {
        self.data.iter()
    }

    /// Volume average `⟨W⟩`, summed in storage order.
    pub fn mean(&self) -> Tensor2 {
        let mut acc = Tensor2::ZERO;
        for t in &self.data {
            acc += *t;
        }
        acc * (1.0 / self.data.len() as f64)
    }

    /// Euclidean norm over all voxels and components.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &FieldT2) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.ddot(b))
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(Tensor2::is_finite)
    }

    /// Flattens to `[F11, F12, F21, F22]` per voxel.
    pub fn to_flat(&self) -> Vec<f64> {
        self.data.iter().flat_map(|t| t.flatten()).collect()
    }

    pub fn from_flat(grid: &RveGrid, flat: &[f64]) -> Result<Self> {
        if flat.len() != 4 * grid.voxel_count() {
            return Err(Error::invalid("flat field length mismatch"));
        }
        let data = flat
            .chunks_exact(4)
            .map(|c| Tensor2::unflatten([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(FieldT2 { n: grid.n(), data })
    }
}

impl Index<usize> for FieldT2 {
    type Output = Tensor2;
    fn index(&self, idx: usize) -> &Tensor2 {
        &self.data[idx]
    }
}

impl IndexMut<usize> for FieldT2 {
    fn index_mut(&mut self, idx: usize) -> &mut Tensor2 {
        &mut self.data[idx]
    }
}

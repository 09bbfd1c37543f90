use crate::error::{Error, Result};
use crate::materials::Material;
use crate::tensor::Tensor2;

/// Periodic pixel grid on `(−L1, L1) × (−L2, L2)` with odd voxel counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RveGrid {
    n: [usize; 2],
    half_len: [f64; 2],
}

impl RveGrid {
    pub fn new(n: [usize; 2], half_len: [f64; 2]) -> Result<Self> {
        for (a, &na) in n.iter().enumerate() {
            if na == 0 || na % 2 == 0 {
                return Err(Error::invalid(format!(
                    "grid size N{} must be odd and positive (got {na})",
                    a + 1
                )));
            }
        }
        if !half_len.iter().all(|l| *l > 0.0 && l.is_finite()) {
            return Err(Error::invalid(format!(
                "cell half-lengths must be positive (got {half_len:?})"
            )));
        }
        Ok(RveGrid { n, half_len })
    }

    /// Square unit-size cell, `L1 = L2 = 1/2`.
    pub fn square(n: usize) -> Result<Self> {
        Self::new([n, n], [0.5, 0.5])
    }

    pub fn n(&self) -> [usize; 2] {
        self.n
    }

    pub fn half_len(&self) -> [f64; 2] {
        self.half_len
    }

    pub fn voxel_count(&self) -> usize {
        self.n[0] * self.n[1]
    }

    /// Voxel widths `h = 2L / N`.
    pub fn spacing(&self) -> [f64; 2] {
        [
            2.0 * self.half_len[0] / self.n[0] as f64,
            2.0 * self.half_len[1] / self.n[1] as f64,
        ]
    }

    /// Flat storage index; the second direction is contiguous.
    pub fn index(&self, j1: usize, j2: usize) -> usize {
        j1 * self.n[1] + j2
    }

    pub fn unravel(&self, idx: usize) -> (usize, usize) {
        (idx / self.n[1], idx % self.n[1])
    }

    /// Voxel-center coordinate `X_j = −L + h (j + 1/2)` for zero-based `j`.
    pub fn center(&self, j1: usize, j2: usize) -> [f64; 2] {
        let h = self.spacing();
        [
            -self.half_len[0] + h[0] * (j1 as f64 + 0.5),
            -self.half_len[1] + h[1] * (j2 as f64 + 0.5),
        ]
    }
}

/// Per-voxel phase index into the material list.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    phases: Vec<usize>,
}

impl PhaseMap {
    pub fn new(grid: &RveGrid, phases: Vec<usize>) -> Result<Self> {
        if phases.len() != grid.voxel_count() {
            return Err(Error::invalid(format!(
                "phase map has {} entries for a {}x{} grid",
                phases.len(),
                grid.n()[0],
                grid.n()[1]
            )));
        }
        Ok(PhaseMap { phases })
    }

    pub fn uniform(grid: &RveGrid, phase: usize) -> Self {
        PhaseMap {
            phases: vec![phase; grid.voxel_count()],
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.phases
    }

    /// Fraction of voxels carrying `phase`.
    pub fn fraction(&self, phase: usize) -> f64 {
        self.phases.iter().filter(|&&p| p == phase).count() as f64 / self.phases.len() as f64
    }
}

/// Periodic micro-structure: grid, phase map and one material per phase.
#[derive(Debug, Clone, PartialEq)]
pub struct RveProblem {
    grid: RveGrid,
    phases: PhaseMap,
    materials: Vec<Material>,
}

impl RveProblem {
    pub fn new(grid: RveGrid, phases: PhaseMap, materials: Vec<Material>) -> Result<Self> {
        if phases.as_slice().len() != grid.voxel_count() {
            return Err(Error::invalid("phase map does not match grid"));
        }
        if let Some(bad) = phases.as_slice().iter().find(|&&p| p >= materials.len()) {
            return Err(Error::invalid(format!(
                "phase index {bad} has no material ({} defined)",
                materials.len()
            )));
        }
        Ok(RveProblem {
            grid,
            phases,
            materials,
        })
    }

    pub fn homogeneous(grid: RveGrid, material: Material) -> Self {
        RveProblem {
            phases: PhaseMap::uniform(&grid, 0),
            grid,
            materials: vec![material],
        }
    }

    /// Two layers stacked along `X1`: phase 0 where `X1 < 0`, phase 1 elsewhere.
    ///
    /// With an odd `N1` the split is `(N1 − 1)/2` against `(N1 + 1)/2` voxels;
    /// [`PhaseMap::fraction`] reports the realized volume fraction.
    pub fn laminate(grid: RveGrid, first: Material, second: Material) -> Self {
        let phases = (0..grid.voxel_count())
            .map(|idx| {
                let (j1, j2) = grid.unravel(idx);
                usize::from(grid.center(j1, j2)[0] >= 0.0)
            })
            .collect();
        RveProblem {
            grid,
            phases: PhaseMap { phases },
            materials: vec![first, second],
        }
    }

    /// Centered circular inclusion (phase 1) in a matrix (phase 0), rasterized by
    /// the voxel-center-in-circle test. The radius satisfies `π R² = f · |cell|`.
    pub fn circular_inclusion(
        grid: RveGrid,
        matrix: Material,
        inclusion: Material,
        volume_fraction: f64,
    ) -> Result<Self> {
        if !(volume_fraction > 0.0 && volume_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "inclusion volume fraction must lie in (0, 1) (got {volume_fraction})"
            )));
        }
        let [l1, l2] = grid.half_len();
        let area = 4.0 * l1 * l2;
        let radius = (volume_fraction * area / std::f64::consts::PI).sqrt();
        if radius > l1.min(l2) {
            return Err(Error::invalid("inclusion does not fit in the cell"));
        }
        let phases = (0..grid.voxel_count())
            .map(|idx| {
                let (j1, j2) = grid.unravel(idx);
                let [x, y] = grid.center(j1, j2);
                usize::from(x * x + y * y <= radius * radius)
            })
            .collect();
        Ok(RveProblem {
            grid,
            phases: PhaseMap { phases },
            materials: vec![matrix, inclusion],
        })
    }

    pub fn grid(&self) -> &RveGrid {
        &self.grid
    }

    pub fn phases(&self) -> &PhaseMap {
        &self.phases
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn material_at(&self, idx: usize) -> &Material {
        &self.materials[self.phases.phases[idx]]
    }

    /// One-line human-readable summary, stored in dataset headers.
    pub fn describe(&self) -> String {
        let n = self.grid.n();
        let mats: Vec<String> = self
            .materials
            .iter()
            .enumerate()
            .map(|(p, m)| {
                let frac = self.phases.fraction(p);
                match m {
                    Material::NeoHookeanA(a) => {
                        format!("phase{p}:A(mu={},beta={}) f={frac:.6}", a.mu(), a.beta())
                    }
                    Material::NeoHookeanB(b) => {
                        format!("phase{p}:B(E={},nu={}) f={frac:.6}", b.young(), b.poisson())
                    }
                }
            })
            .collect();
        format!("grid {}x{}; {}", n[0], n[1], mats.join("; "))
    }
}

/// Checks the admissibility of a prescribed average deformation.
pub(crate) fn check_fbar(fbar: &Tensor2) -> Result<()> {
    if !fbar.is_finite() {
        return Err(Error::invalid(format!("non-finite Fbar {fbar:?}")));
    }
    let det = fbar.det();
    if det <= 0.0 {
        return Err(Error::NonPositiveJacobian {
            det,
            location: "prescribed Fbar".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::NeoHookeanA;

    #[test]
    fn even_grids_are_rejected() {
        assert!(RveGrid::new([4, 5], [1.0, 1.0]).is_err());
        assert!(RveGrid::new([5, 0], [1.0, 1.0]).is_err());
        assert!(RveGrid::new([5, 5], [0.0, 1.0]).is_err());
        assert!(RveGrid::new([5, 3], [1.0, 1.0]).is_ok());
    }

    #[test]
    fn centers_are_symmetric() {
        let g = RveGrid::new([3, 5], [1.0, 2.0]).unwrap();
        assert_eq!(g.center(1, 2), [0.0, 0.0]);
        let c = g.center(0, 0);
        assert!((c[0] + 2.0 / 3.0).abs() < 1e-15 && (c[1] + 1.6).abs() < 1e-15);
    }

    #[test]
    fn laminate_split_and_inclusion_fraction() {
        let m1: Material = NeoHookeanA::new(100.0, 1.0).unwrap().into();
        let m2: Material = NeoHookeanA::new(1000.0, 1.0).unwrap().into();
        let lam = RveProblem::laminate(RveGrid::square(31).unwrap(), m1, m2);
        assert!((lam.phases().fraction(0) - 15.0 / 31.0).abs() < 1e-15);

        let inc =
            RveProblem::circular_inclusion(RveGrid::square(101).unwrap(), m1, m2, 0.2).unwrap();
        assert!((inc.phases().fraction(1) - 0.2).abs() < 0.01);
    }

    #[test]
    fn phase_indices_are_checked() {
        let g = RveGrid::square(3).unwrap();
        let m: Material = NeoHookeanA::new(1.0, 1.0).unwrap().into();
        let phases = PhaseMap::new(&g, vec![0, 0, 0, 0, 1, 0, 0, 0, 0]).unwrap();
        assert!(RveProblem::new(g, phases, vec![m]).is_err());
        assert!(PhaseMap::new(&g, vec![0; 8]).is_err());
    }
}

//! Spectral (FFT) solver for periodic representative volume elements.
//!
//! The fluctuation field is kept compatible by the Green projection
//! `𝔾_ijkl(ξ) = δ_ik ξ_j ξ_l / |ξ|²`; equilibrium `𝔾 ∗ P = 0` is solved by
//! Newton's method with conjugate-gradient inner solves.

mod cg;
mod export;
mod field;
mod problem;
mod solver;
mod spectral;

pub use cg::{conjugate_gradient, truncated_conjugate_gradient, CgOutcome};
pub use export::write_field_csv;
pub use field::FieldT2;
pub(crate) use problem::check_fbar;
pub use problem::{PhaseMap, RveGrid, RveProblem};
pub use solver::{macro_tangent, residual, solve_micro, MicroSolution, MicroSolver, SolverOptions};
pub use spectral::{integer_wavenumber, wavenumbers, Spectral};

/// `𝔾 ∗ W` with freshly planned transforms.
pub fn project(field: &FieldT2, grid: &RveGrid) -> FieldT2 {
    Spectral::new(grid).project(field)
}

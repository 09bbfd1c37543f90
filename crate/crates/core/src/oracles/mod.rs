//! Independent reference solutions: the two-phase laminate, the 1D bar with an
//! oscillating modulus, and central-difference differentiation.

mod diff;
mod laminate;
mod toy1d;

pub use diff::central_diff_tangent;
pub use laminate::{laminate_energy_stress, laminate_solve, LaminateProblem, LaminateState};
pub use toy1d::{
    solve_bar, toy1d_fullfield, toy1d_micro_energy, toy1d_micro_stress, toy1d_micro_tangent,
    toy1d_modulus, toy1d_point_energy, toy1d_point_stress, BarOptions, BarSolution, Toy1dProblem,
};

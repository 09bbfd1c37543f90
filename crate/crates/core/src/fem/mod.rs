//! Plane-strain Q4 finite elements at the macro scale.

mod export;
mod linalg;
mod mesh;
mod provider;
mod solve;

pub use export::{format_solution, read_solution, write_solution, SolutionTables};
pub use linalg::{reverse_cuthill_mckee, Skyline};
pub use mesh::{
    cantilever, cantilever_fullfield, cook_membrane, format_mesh, mapped_grid, parse_mesh,
    read_mesh, write_mesh, BoundaryConditions, Dirichlet, MacroMesh, MacroProblem, Traction,
};
pub use provider::{NestedProvider, PointResponse, Provider, NESTED_NEWTON_TOL};
pub use solve::{
    solve_macro, AssembledSystem, Assembler, MacroOptions, MacroSolution, MacroWarning,
    QuadratureState,
};

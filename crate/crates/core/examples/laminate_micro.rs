//! Spectral micro-solve of a two-phase laminate, checked against the
//! closed-form laminate solution, with the macro tangent compared to central
//! differences and the voxel fields written to CSV.
//!
//! ```text
//! cargo run --release --example laminate_micro -- [out.csv]
//! ```

use homogen::micro::{write_field_csv, MicroSolver, SolverOptions};
use homogen::oracles::{central_diff_tangent, laminate_energy_stress, LaminateProblem};
use homogen::tensor::Tensor2;
use homogen::validate::default_laminate;

fn main() -> homogen::Result<()> {
    let out = std::env::args().nth(1);
    let rve = default_laminate(31)?;
    let oracle = LaminateProblem::matching(&rve)?;
    let solver = MicroSolver::new(rve.clone(), SolverOptions::default())?;
    println!("{}", rve.describe());

    let fbar = Tensor2::from_rows([[1.15, 0.2], [-0.1, 0.9]]);
    let sol = solver.solve(&fbar)?;
    let (psi, p) = laminate_energy_stress(&oracle, &fbar)?;
    println!(
        "newton iterations {}, CG iterations {}, relative residual {:.2e}",
        sol.iterations, sol.cg_iterations, sol.relative_residual
    );
    println!("energy  spectral {:.12}  exact {:.12}", sol.psi_bar, psi);
    println!(
        "P11     spectral {:.12}  exact {:.12}",
        sol.pbar[(0, 0)],
        p[(0, 0)]
    );
    println!("stress error {:.2e}", (sol.pbar - p).norm() / p.norm());

    let c = solver.macro_tangent(&sol)?;
    let fd = central_diff_tangent(|f| Ok(laminate_energy_stress(&oracle, f)?.1), &fbar, 1e-6)?;
    println!(
        "tangent error vs central differences {:.2e}",
        (c - fd).max_abs() / fd.max_abs()
    );

    if let Some(path) = out {
        write_field_csv(path.as_ref(), &rve, &sol)?;
        println!("fields written to {path}");
    }
    Ok(())
}

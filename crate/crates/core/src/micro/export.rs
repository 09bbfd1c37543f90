use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::micro::problem::RveProblem;
use crate::micro::solver::MicroSolution;

/// Writes the converged micro field as CSV with header
/// `X1,X2,F11,F12,F21,F22,P11,P12,P21,P22,psi`, one row per voxel.
pub fn write_field_csv(path: &Path, problem: &RveProblem, sol: &MicroSolution) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_field(&mut w, problem, sol).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_field<W: Write>(
    w: &mut W,
    problem: &RveProblem,
    sol: &MicroSolution,
) -> std::io::Result<()> {
    writeln!(w, "X1,X2,F11,F12,F21,F22,P11,P12,P21,P22,psi")?;
    let grid = problem.grid();
    for (idx, f) in sol.f.iter().enumerate() {
        let (j1, j2) = grid.unravel(idx);
        let x = grid.center(j1, j2);
        let m = problem.material_at(idx);
        let (psi, p) = match (m.energy(f), m.stress(f)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => (f64::NAN, crate::tensor::Tensor2::ZERO),
        };
        let fv = f.flatten();
        let pv = p.flatten();
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            x[0], x[1], fv[0], fv[1], fv[2], fv[3], pv[0], pv[1], pv[2], pv[3], psi
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{Material, NeoHookeanA};
    use crate::micro::problem::RveGrid;
    use crate::micro::solver::{solve_micro, SolverOptions};
    use crate::tensor::Tensor2;

    #[test]
    fn csv_has_one_row_per_voxel() {
        let m: Material = NeoHookeanA::new(1.0, 1.0).unwrap().into();
        let p = RveProblem::homogeneous(RveGrid::square(3).unwrap(), m);
        let sol = solve_micro(&p, &Tensor2::diag(1.1, 0.9), &SolverOptions::default()).unwrap();
        let dir = std::env::temp_dir().join(format!("homogen-field-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.csv");
        write_field_csv(&path, &p, &sol).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("X1,X2,F11"));
        std::fs::remove_dir_all(dir).unwrap();
    }
}

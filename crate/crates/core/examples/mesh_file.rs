//! Macro FEM from a plain-text mesh: a two-material strip is parsed, stretched
//! with a direct Neo-Hookean law and the solution table written and read back.
//!
//! ```text
//! cargo run --release --example mesh_file -- [outdir]
//! ```

use std::path::{Path, PathBuf};

use homogen::fem::{
    parse_mesh, read_solution, solve_macro, write_solution, MacroOptions, Provider,
};
use homogen::materials::NeoHookeanB;

const MESH: &str = "\
# 3 x 1 strip, the middle element stiffer
NODES 8
1 0 0
2 1 0
3 2 0
4 3 0
5 0 1
6 1 1
7 2 1
8 3 1
ELEMS 3
1 1 2 6 5 0
2 2 3 7 6 1
3 3 4 8 7 0
DIRICHLET 3
1 1 0
1 2 0
5 1 0
TRACTION 1
4 8 5 0
";

fn main() -> homogen::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| std::env::temp_dir().display().to_string()),
    );
    let (mesh, bc) = parse_mesh(MESH, Path::new("strip.mesh"))?;
    println!(
        "{} nodes, {} elements",
        mesh.node_count(),
        mesh.element_count()
    );

    let provider = Provider::Direct(vec![
        NeoHookeanB::new(100.0, 0.3)?.into(),
        NeoHookeanB::new(1000.0, 0.3)?.into(),
    ]);
    let sol = solve_macro(&mesh, &bc, &provider, &MacroOptions::default())?;
    for (i, u) in sol.u.iter().enumerate() {
        println!("node {}: u = ({:+.6}, {:+.6})", i + 1, u[0], u[1]);
    }
    println!(
        "Newton iterations per step {:?}",
        sol.newton_history.iter().map(Vec::len).collect::<Vec<_>>()
    );
    println!(
        "reaction balance {:.2e}, energy {:.6}",
        sol.balance_error(),
        sol.energy
    );

    let path = dir.join("strip_solution.csv");
    write_solution(&path, &mesh, &sol)?;
    let tables = read_solution(&path)?;
    println!(
        "wrote {} node rows and {} quadrature rows to {}",
        tables.nodes.len(),
        tables.quadrature.len(),
        path.display()
    );
    Ok(())
}

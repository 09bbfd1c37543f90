use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::mesh::MacroMesh;
use crate::fem::solve::MacroSolution;

/// Node and quadrature tables read back from a solution file.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTables {
    /// `[X1, X2, u1, u2]` per node.
    pub nodes: Vec<[f64; 4]>,
    /// `[element, gp, X1, X2, F11..F22, P11..P22, S11..S22]` per Gauss point.
    pub quadrature: Vec<[f64; 16]>,
}

const NODE_HEADER: &str = "node,X1,X2,u1,u2";
const QP_HEADER: &str = "element,gp,X1,X2,F11,F12,F21,F22,P11,P12,P21,P22,S11,S12,S21,S22";

/// Two CSV blocks: `# nodes` then `# quadrature`.
pub fn format_solution(mesh: &MacroMesh, sol: &MacroSolution) -> String {
    let mut s = String::new();
    writeln!(s, "# nodes").unwrap();
    writeln!(s, "{NODE_HEADER}").unwrap();
    for (n, (x, u)) in mesh.nodes().iter().zip(&sol.u).enumerate() {
        writeln!(
            s,
            "{n},{:.16e},{:.16e},{:.16e},{:.16e}",
            x[0], x[1], u[0], u[1]
        )
        .unwrap();
    }
    writeln!(s, "# quadrature").unwrap();
    writeln!(s, "{QP_HEADER}").unwrap();
    for q in &sol.quadrature {
        write!(s, "{},{},{:.16e},{:.16e}", q.element, q.gp, q.x[0], q.x[1]).unwrap();
        for t in [q.f, q.p, q.s] {
            for v in t.flatten() {
                write!(s, ",{v:.16e}").unwrap();
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_solution(path: &Path, mesh: &MacroMesh, sol: &MacroSolution) -> Result<()> {
    std::fs::write(path, format_solution(mesh, sol)).map_err(|e| Error::io(path, e))
}

pub fn read_solution(path: &Path) -> Result<SolutionTables> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = SolutionTables {
        nodes: Vec::new(),
        quadrature: Vec::new(),
    };
    let mut section = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let ln = i + 1;
        match line {
            "" => continue,
            "# nodes" => section = Some(0),
            "# quadrature" => section = Some(1),
            NODE_HEADER | QP_HEADER => continue,
            _ => {
                let vals = line
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|e| err(ln, format!("{t:?}: {e}")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                match section {
                    Some(0) if vals.len() == 5 => {
                        out.nodes.push([vals[1], vals[2], vals[3], vals[4]])
                    }
                    Some(1) if vals.len() == 16 => out.quadrature.push(vals.try_into().unwrap()),
                    Some(_) => {
                        return Err(err(ln, format!("unexpected column count {}", vals.len())))
                    }
                    None => return Err(err(ln, "data before a section marker".into())),
                }
            }
        }
    }
    Ok(out)
}

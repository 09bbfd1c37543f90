use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// `±1/√3`, the 2×2 Gauss abscissae.
pub(crate) const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Gauss points in element order `(ξ, η)`: (−,−), (+,−), (+,+), (−,+).
pub(crate) fn gauss_points() -> [[f64; 2]; 4] {
    [
        [GAUSS[0], GAUSS[0]],
        [GAUSS[1], GAUSS[0]],
        [GAUSS[1], GAUSS[1]],
        [GAUSS[0], GAUSS[1]],
    ]
}

/// Bilinear shape functions and their parametric derivatives.
pub(crate) fn shape(xi: f64, eta: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let n = [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ];
    let dn = [
        [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
        [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
        [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
        [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
    ];
    (n, dn)
}

/// Four-node quadrilateral mesh in the reference configuration.
/// Element nodes are counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroMesh {
    nodes: Vec<[f64; 2]>,
    elems: Vec<[usize; 4]>,
    tags: Vec<usize>,
}

/// Reference-configuration shape-function gradients and weights per Gauss point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ElementGeometry {
    pub grad: [[[f64; 2]; 4]; 4],
    pub weight: [f64; 4],
    pub position: [[f64; 2]; 4],
}

impl MacroMesh {
    /// Builds a mesh; every element must have a positive Jacobian at all Gauss points.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        elems: Vec<[usize; 4]>,
        tags: Option<Vec<usize>>,
    ) -> Result<Self> {
        let tags = tags.unwrap_or_else(|| vec![0; elems.len()]);
        if tags.len() != elems.len() {
            return Err(Error::invalid("one material tag per element is required"));
        }
        if elems.is_empty() {
            return Err(Error::invalid("mesh has no elements"));
        }
        if !nodes.iter().all(|p| p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::invalid("node coordinates must be finite"));
        }
        for (e, conn) in elems.iter().enumerate() {
            if conn.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::invalid(format!(
                    "element {e} references a missing node"
                )));
            }
        }
        let mesh = MacroMesh { nodes, elems, tags };
        for e in 0..mesh.elems.len() {
            mesh.geometry(e)?;
        }
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elems
    }

    pub fn tags(&self) -> &[usize] {
        &self.tags
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elems.len()
    }

    pub(crate) fn geometry(&self, e: usize) -> Result<ElementGeometry> {
        let conn = self.elems[e];
        let mut out = ElementGeometry {
            grad: [[[0.0; 2]; 4]; 4],
            weight: [0.0; 4],
            position: [[0.0; 2]; 4],
        };
        for (g, [xi, eta]) in gauss_points().into_iter().enumerate() {
            let (n, dn) = shape(xi, eta);
            let mut j = [[0.0; 2]; 2];
            for a in 0..4 {
                let x = self.nodes[conn[a]];
                for r in 0..2 {
                    out.position[g][r] += n[a] * x[r];
                    for c in 0..2 {
                        j[r][c] += x[r] * dn[a][c];
                    }
                }
            }
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det > 0.0) {
                return Err(Error::NonPositiveJacobian {
                    det,
                    location: format!("element {e}, Gauss point {g} (reference geometry)"),
                });
            }
            let inv = [
                [j[1][1] / det, -j[0][1] / det],
                [-j[1][0] / det, j[0][0] / det],
            ];
            for a in 0..4 {
                // dN/dX_c = dN/dξ_r (J⁻¹)_rc
                for c in 0..2 {
                    out.grad[g][a][c] = dn[a][0] * inv[0][c] + dn[a][1] * inv[1][c];
                }
            }
            out.weight[g] = det;
        }
        Ok(out)
    }

    /// Total reference area.
    pub fn area(&self) -> f64 {
        (0..self.elems.len())
            .map(|e| {
                self.geometry(e)
                    .map(|g| g.weight.iter().sum::<f64>())
                    .unwrap_or(0.0)
            })
            .sum()
    }

    /// Node closest to `p`.
    pub fn nearest_node(&self, p: [f64; 2]) -> usize {
        let d = |q: &[f64; 2]| (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        (0..self.nodes.len())
            .min_by(|&a, &b| d(&self.nodes[a]).total_cmp(&d(&self.nodes[b])))
            .unwrap_or(0)
    }

    /// Nodes with `|x − value| < tol` along `axis`.
    pub fn nodes_on(&self, axis: usize, value: f64, tol: f64) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&n| (self.nodes[n][axis] - value).abs() < tol)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dirichlet {
    pub node: usize,
    /// 0 for `u_x`, 1 for `u_y`.
    pub comp: usize,
    pub value: f64,
}

/// Dead-load traction on the straight edge `n1 → n2`, force per reference length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traction {
    pub n1: usize,
    pub n2: usize,
    pub t: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryConditions {
    pub dirichlet: Vec<Dirichlet>,
    pub tractions: Vec<Traction>,
}

impl BoundaryConditions {
    pub fn validate(&self, mesh: &MacroMesh) -> Result<()> {
        if self.dirichlet.is_empty() {
            return Err(Error::invalid(
                "at least one Dirichlet condition is required",
            ));
        }
        let n = mesh.node_count();
        for d in &self.dirichlet {
            if d.node >= n || d.comp > 1 || !d.value.is_finite() {
                return Err(Error::invalid(format!("bad Dirichlet entry {d:?}")));
            }
        }
        for t in &self.tractions {
            if t.n1 >= n || t.n2 >= n || t.n1 == t.n2 || !t.t.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("bad traction entry {t:?}")));
            }
        }
        Ok(())
    }

    /// Clamps both components of every listed node.
    pub fn clamp(&mut self, nodes: &[usize]) {
        for &node in nodes {
            for comp in 0..2 {
                self.dirichlet.push(Dirichlet {
                    node,
                    comp,
                    value: 0.0,
                });
            }
        }
    }

    /// Uniform traction on consecutive edges of a node chain.
    pub fn load_chain(&mut self, chain: &[usize], t: [f64; 2]) {
        for w in chain.windows(2) {
            self.tractions.push(Traction {
                n1: w[0],
                n2: w[1],
                t,
            });
        }
    }

    /// Consistent nodal forces from the edge tractions.
    pub fn nodal_loads(&self, mesh: &MacroMesh) -> Vec<[f64; 2]> {
        let mut f = vec![[0.0; 2]; mesh.node_count()];
        for t in &self.tractions {
            let (a, b) = (mesh.nodes[t.n1], mesh.nodes[t.n2]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            for c in 0..2 {
                f[t.n1][c] += 0.5 * len * t.t[c];
                f[t.n2][c] += 0.5 * len * t.t[c];
            }
        }
        f
    }
}

/// A mesh with its boundary data and a designated output node.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroProblem {
    pub mesh: MacroMesh,
    pub bc: BoundaryConditions,
    /// Node whose displacement is reported (tip).
    pub tip: usize,
}

/// Structured grid of `nx × ny` elements over the image of the unit square
/// under the bilinear map of the four corners (counter-clockwise).
pub fn mapped_grid(corners: [[f64; 2]; 4], nx: usize, ny: usize) -> Result<MacroMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(
            "grid needs at least one element per direction",
        ));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let eta = j as f64 / ny as f64;
        for i in 0..=nx {
            let xi = i as f64 / nx as f64;
            let w = [
                (1.0 - xi) * (1.0 - eta),
                xi * (1.0 - eta),
                xi * eta,
                (1.0 - xi) * eta,
            ];
            let mut p = [0.0; 2];
            for (c, wc) in corners.iter().zip(w) {
                p[0] += wc * c[0];
                p[1] += wc * c[1];
            }
            nodes.push(p);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elems = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elems.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    MacroMesh::new(nodes, elems, None)
}

/// Left-edge (i = 0) and right-edge (i = nx) node chains of a [`mapped_grid`], bottom to top.
fn grid_edges(nx: usize, ny: usize) -> (Vec<usize>, Vec<usize>) {
    let left = (0..=ny).map(|j| j * (nx + 1)).collect();
    let right = (0..=ny).map(|j| j * (nx + 1) + nx).collect();
    (left, right)
}

/// Cook's membrane: trapezoid (0,0), (48,44), (48,60), (0,44), clamped on the
/// left, uniform vertical traction `q0` on the right edge. Tip is (48, 60).
pub fn cook_membrane(nx: usize, ny: usize, q0: f64) -> Result<MacroProblem> {
    let mesh = mapped_grid(
        [[0.0, 0.0], [48.0, 44.0], [48.0, 60.0], [0.0, 44.0]],
        nx,
        ny,
    )?;
    let (left, right) = grid_edges(nx, ny);
    let mut bc = BoundaryConditions::default();
    bc.clamp(&left);
    bc.load_chain(&right, [0.0, q0]);
    let tip = *right.last().expect("non-empty edge");
    Ok(MacroProblem { mesh, bc, tip })
}

/// Rectangular cantilever `[0, length] × [0, height]`, clamped at `x = 0`,
/// vertical traction `q0` on `x = length`. Tip is the top-right corner.
pub fn cantilever(length: f64, height: f64, nx: usize, ny: usize, q0: f64) -> Result<MacroProblem> {
    let mesh = mapped_grid(
        [[0.0, 0.0], [length, 0.0], [length, height], [0.0, height]],
        nx,
        ny,
    )?;
    let (left, right) = grid_edges(nx, ny);
    let mut bc = BoundaryConditions::default();
    bc.clamp(&left);
    bc.load_chain(&right, [0.0, q0]);
    let tip = *right.last().expect("non-empty edge");
    Ok(MacroProblem { mesh, bc, tip })
}

/// Full-field cantilever made of `cells_x × cells_y` unit cells, each meshed by
/// `m × m` elements; elements whose centre lies within `radius` of the cell
/// centre get tag 1 (inclusion), others tag 0 (matrix).
pub fn cantilever_fullfield(
    cells_x: usize,
    cells_y: usize,
    m: usize,
    radius: f64,
    q0: f64,
) -> Result<MacroProblem> {
    if m == 0 || !(radius > 0.0 && radius < 0.5) {
        return Err(Error::invalid(
            "cell resolution must be positive and the radius inside (0, 0.5)",
        ));
    }
    let mut p = cantilever(cells_x as f64, cells_y as f64, cells_x * m, cells_y * m, q0)?;
    let h = 1.0 / m as f64;
    let nx = cells_x * m;
    let tags = (0..p.mesh.element_count())
        .map(|e| {
            let (i, j) = (e % nx, e / nx);
            let cx = ((i % m) as f64 + 0.5) * h - 0.5;
            let cy = ((j % m) as f64 + 0.5) * h - 0.5;
            usize::from(cx * cx + cy * cy <= radius * radius)
        })
        .collect();
    p.mesh.tags = tags;
    Ok(p)
}

/// Parses the plain-text mesh format (`NODES`, `ELEMS`, `DIRICHLET`,
/// `TRACTION` sections; `#` starts a comment). Ids are arbitrary integers;
/// Dirichlet components are `1` (x) or `2` (y).
pub fn parse_mesh(text: &str, path: &Path) -> Result<(MacroMesh, BoundaryConditions)> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    let mut ids: HashMap<i64, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut elems = Vec::new();
    let mut tags = Vec::new();
    let mut bc = BoundaryConditions::default();
    let mut seen_elems = false;

    while let Some((ln, header)) = lines.next() {
        let mut h = header.split_whitespace();
        let key = h.next().unwrap_or("").to_ascii_uppercase();
        let count: usize = h.next().and_then(|c| c.parse().ok()).ok_or_else(|| {
            err(
                ln,
                format!("expected `<SECTION> <count>`, found {header:?}"),
            )
        })?;
        if h.next().is_some() {
            return Err(err(
                ln,
                format!("trailing tokens in section header {header:?}"),
            ));
        }
        for _ in 0..count {
            let (ln, row) = lines
                .next()
                .ok_or_else(|| err(ln, format!("section {key} ends before {count} rows")))?;
            let tok: Vec<&str> = row.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                tok.get(k)
                    .and_then(|t| t.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(ln, format!("bad number in column {} of {row:?}", k + 1)))
            };
            let int = |k: usize| -> Result<i64> {
                tok.get(k)
                    .and_then(|t| t.parse::<i64>().ok())
                    .ok_or_else(|| err(ln, format!("bad integer in column {} of {row:?}", k + 1)))
            };
            let node = |k: usize| -> Result<usize> {
                let id = int(k)?;
                ids.get(&id)
                    .copied()
                    .ok_or_else(|| err(ln, format!("unknown node id {id}")))
            };
            match key.as_str() {
                "NODES" => {
                    if tok.len() != 3 {
                        return Err(err(ln, format!("node row needs `id x y`, found {row:?}")));
                    }
                    let id = int(0)?;
                    if ids.insert(id, nodes.len()).is_some() {
                        return Err(err(ln, format!("duplicate node id {id}")));
                    }
                    nodes.push([num(1)?, num(2)?]);
                }
                "ELEMS" => {
                    if !(5..=6).contains(&tok.len()) {
                        return Err(err(
                            ln,
                            format!("element row needs `id n1 n2 n3 n4 [mat]`, found {row:?}"),
                        ));
                    }
                    elems.push([node(1)?, node(2)?, node(3)?, node(4)?]);
                    let tag = if tok.len() == 6 { int(5)? } else { 0 };
                    if tag < 0 {
                        return Err(err(ln, "material tag must be non-negative".into()));
                    }
                    tags.push(tag as usize);
                    seen_elems = true;
                }
                "DIRICHLET" => {
                    if tok.len() != 3 {
                        return Err(err(
                            ln,
                            format!("Dirichlet row needs `node comp value`, found {row:?}"),
                        ));
                    }
                    let comp = int(1)?;
                    if !(1..=2).contains(&comp) {
                        return Err(err(ln, format!("component must be 1 or 2, found {comp}")));
                    }
                    bc.dirichlet.push(Dirichlet {
                        node: node(0)?,
                        comp: comp as usize - 1,
                        value: num(2)?,
                    });
                }
                "TRACTION" => {
                    if tok.len() != 4 {
                        return Err(err(
                            ln,
                            format!("traction row needs `n1 n2 tx ty`, found {row:?}"),
                        ));
                    }
                    bc.tractions.push(Traction {
                        n1: node(0)?,
                        n2: node(1)?,
                        t: [num(2)?, num(3)?],
                    });
                }
                other => return Err(err(ln, format!("unknown section {other:?}"))),
            }
        }
    }
    if !seen_elems {
        return Err(err(0, "mesh file has no ELEMS section".into()));
    }
    let mesh = MacroMesh::new(nodes, elems, Some(tags))?;
    bc.validate(&mesh)?;
    Ok((mesh, bc))
}

pub fn read_mesh(path: &Path) -> Result<(MacroMesh, BoundaryConditions)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, path)
}

/// Serializes to the text format read by [`parse_mesh`], with 1-based ids.
pub fn format_mesh(mesh: &MacroMesh, bc: &BoundaryConditions) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NODES {}", mesh.node_count());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{} {:.16e} {:.16e}", i + 1, p[0], p[1]);
    }
    let _ = writeln!(s, "ELEMS {}", mesh.element_count());
    for (e, (c, t)) in mesh.elems.iter().zip(&mesh.tags).enumerate() {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            e + 1,
            c[0] + 1,
            c[1] + 1,
            c[2] + 1,
            c[3] + 1,
            t
        );
    }
    let _ = writeln!(s, "DIRICHLET {}", bc.dirichlet.len());
    for d in &bc.dirichlet {
        let _ = writeln!(s, "{} {} {:.16e}", d.node + 1, d.comp + 1, d.value);
    }
    let _ = writeln!(s, "TRACTION {}", bc.tractions.len());
    for t in &bc.tractions {
        let _ = writeln!(
            s,
            "{} {} {:.16e} {:.16e}",
            t.n1 + 1,
            t.n2 + 1,
            t.t[0],
            t.t[1]
        );
    }
    s
}

pub fn write_mesh(path: &Path, mesh: &MacroMesh, bc: &BoundaryConditions) -> Result<()> {
    std::fs::write(path, format_mesh(mesh, bc)).map_err(|e| Error::io(path, e))
}

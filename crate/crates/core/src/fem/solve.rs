use crate::error::{Error, Result};
use crate::fem::linalg::{reverse_cuthill_mckee, Skyline};
use crate::fem::mesh::{BoundaryConditions, ElementGeometry, MacroMesh};
use crate::fem::provider::{PointQuery, Provider};
use crate::tensor::{inv2, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroOptions {
    pub load_steps: usize,
    /// Newton stops when `‖R‖ ≤ tol · ‖R₀‖` within a load step.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MacroOptions {
    fn default() -> Self {
        MacroOptions {
            load_steps: 10,
            tol: 1e-8,
            max_iter: 25,
        }
    }
}

/// Converged state at one Gauss point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureState {
    pub element: usize,
    pub gp: usize,
    /// Reference position.
    pub x: [f64; 2],
    pub f: Tensor2,
    pub p: Tensor2,
    /// Second Piola stress `S = F⁻¹ P`.
    pub s: Tensor2,
}

/// Surrogate input outside its training box at a quadrature point.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroWarning {
    pub step: usize,
    pub element: usize,
    pub gp: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroSolution {
    pub u: Vec<[f64; 2]>,
    pub quadrature: Vec<QuadratureState>,
    /// Final free-dof residual norm and its ratio to the step's initial residual.
    pub residual_norm: f64,
    pub relative_residual: f64,
    /// Residual norms per Newton iteration, one list per load step.
    pub newton_history: Vec<Vec<f64>>,
    /// Nodal `f_int − f_ext` at the converged state (non-zero only at supports).
    pub reactions: Vec<[f64; 2]>,
    /// Applied nodal loads at the final load factor.
    pub external: Vec<[f64; 2]>,
    /// Stored energy `∫ ψ̄ dA`.
    pub energy: f64,
    pub warnings: Vec<MacroWarning>,
    pub micro_solves: usize,
}

impl MacroSolution {
    pub fn displacement(&self, node: usize) -> [f64; 2] {
        self.u[node]
    }

    /// `|Σ reactions + Σ loads| / |Σ loads|` per component (absolute if no load).
    pub fn balance_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..2 {
            let r: f64 = self.reactions.iter().map(|v| v[c]).sum();
            let f: f64 = self.external.iter().map(|v| v[c]).sum();
            let scale = if f == 0.0 { 1.0 } else { f.abs() };
            worst = worst.max((r + f).abs() / scale);
        }
        worst
    }
}

/// Equation numbering and sparsity profile for one mesh and boundary set.
#[derive(Debug, Clone)]
pub struct Assembler {
    mesh: MacroMesh,
    bc: BoundaryConditions,
    geom: Vec<ElementGeometry>,
    eq: Vec<[Option<usize>; 2]>,
    n_eq: usize,
    first: Vec<usize>,
    loads: Vec<[f64; 2]>,
}

/// Residual and tangent over the free degrees of freedom.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    /// Nodal `f_int − λ f_ext` including supported components.
    pub nodal_residual: Vec<[f64; 2]>,
    pub tangent: Option<Skyline>,
    pub energy: f64,
    pub(crate) states: Vec<(Tensor2, Tensor2)>,
}

impl Assembler {
    pub fn new(mesh: &MacroMesh, bc: &BoundaryConditions) -> Result<Self> {
        bc.validate(mesh)?;
        let nn = mesh.node_count();
        let mut adj = vec![Vec::new(); nn];
        for conn in mesh.elements() {
            for &a in conn {
                for &b in conn {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        let order = reverse_cuthill_mckee(&adj);
        let mut fixed = vec![[false; 2]; nn];
        for d in &bc.dirichlet {
            fixed[d.node][d.comp] = true;
        }
        let mut eq = vec![[None; 2]; nn];
        let mut n_eq = 0;
        for &node in &order {
            for c in 0..2 {
                if !fixed[node][c] {
                    eq[node][c] = Some(n_eq);
                    n_eq += 1;
                }
            }
        }
        let mut first: Vec<usize> = (0..n_eq).collect();
        for conn in mesh.elements() {
            let eqs: Vec<usize> = conn
                .iter()
                .flat_map(|&n| eq[n].iter().flatten().copied())
                .collect();
            if let Some(&lo) = eqs.iter().min() {
                for &e in &eqs {
                    first[e] = first[e].min(lo);
                }
            }
        }
        let geom = (0..mesh.element_count())
            .map(|e| mesh.geometry(e))
            .collect::<Result<Vec<_>>>()?;
        Ok(Assembler {
            loads: bc.nodal_loads(mesh),
            mesh: mesh.clone(),
            bc: bc.clone(),
            geom,
            eq,
            n_eq,
            first,
        })
    }

    pub fn free_dofs(&self) -> usize {
        self.n_eq
    }

    /// Equation number of `(node, comp)`, or `None` if prescribed.
    pub fn equation(&self, node: usize, comp: usize) -> Option<usize> {
        self.eq[node][comp]
    }

    pub fn mesh(&self) -> &MacroMesh {
        &self.mesh
    }

    fn deformation(&self, e: usize, g: usize, u: &[[f64; 2]]) -> Tensor2 {
        let conn = self.mesh.elements()[e];
        let grad = &self.geom[e].grad[g];
        let mut f = Tensor2::IDENTITY;
        for a in 0..4 {
            for i in 0..2 {
                for j in 0..2 {
                    f[(i, j)] += u[conn[a]][i] * grad[a][j];
                }
            }
        }
        f
    }

    /// Internal forces, energy and (optionally) the free-dof tangent at displacement `u`.
    pub fn assemble(
        &self,
        provider: &Provider,
        u: &[[f64; 2]],
        load_factor: f64,
        with_tangent: bool,
    ) -> Result<AssembledSystem> {
        let ne = self.mesh.element_count();
        let mut queries = Vec::with_capacity(4 * ne);
        for e in 0..ne {
            for g in 0..4 {
                let f = self.deformation(e, g, u);
                if !(f.det() > 0.0) {
                    return Err(Error::NonPositiveJacobian {
                        det: f.det(),
                        location: format!("element {e}, Gauss point {g}"),
                    });
                }
                queries.push(PointQuery {
                    qp: 4 * e + g,
                    tag: self.mesh.tags()[e],
                    f,
                });
            }
        }
        let responses = provider.respond_batch(&queries, with_tangent);
        let mut fint = vec![[0.0; 2]; self.mesh.node_count()];
        let mut k = with_tangent.then(|| Skyline::with_profile(self.n_eq, self.first.clone()));
        let mut energy = 0.0;
        let mut states = Vec::with_capacity(4 * ne);
        for (e, conn) in self.mesh.elements().iter().enumerate() {
            let geo = &self.geom[e];
            let mut ke = [[0.0; 8]; 8];
            for g in 0..4 {
                let r = match &responses[4 * e + g] {
                    Ok(r) => *r,
                    Err(err) => {
                        return Err(match err {
                            Error::NonPositiveJacobian { det, location } => {
                                Error::NonPositiveJacobian {
                                    det: *det,
                                    location: format!("{location} (element {e}, Gauss point {g})"),
                                }
                            }
                            Error::NewtonDiverged {
                                iterations,
                                residual,
                                context,
                            } => Error::NewtonDiverged {
                                iterations: *iterations,
                                residual: *residual,
                                context: format!("{context} (element {e}, Gauss point {g})"),
                            },
                            Error::CgStalled {
                                iterations,
                                residual,
                            } => Error::CgStalled {
                                iterations: *iterations,
                                residual: *residual,
                            },
                            other => {
                                Error::invalid(format!("element {e}, Gauss point {g}: {other}"))
                            }
                        })
                    }
                };
                let w = geo.weight[g];
                let grad = &geo.grad[g];
                energy += w * r.energy;
                states.push((queries[4 * e + g].f, r.stress));
                for a in 0..4 {
                    for i in 0..2 {
                        fint[conn[a]][i] +=
                            w * (r.stress[(i, 0)] * grad[a][0] + r.stress[(i, 1)] * grad[a][1]);
                    }
                }
                if with_tangent {
                    for a in 0..4 {
                        for i in 0..2 {
                            for b in 0..4 {
                                for kk in 0..2 {
                                    let mut s = 0.0;
                                    for j in 0..2 {
                                        for l in 0..2 {
                                            s += grad[a][j] * r.tangent[(i, j, kk, l)] * grad[b][l];
                                        }
                                    }
                                    ke[2 * a + i][2 * b + kk] += w * s;
                                }
                            }
                        }
                    }
                }
            }
            if let Some(k) = k.as_mut() {
                for a in 0..4 {
                    for i in 0..2 {
                        let Some(p) = self.eq[conn[a]][i] else {
                            continue;
                        };
                        for b in 0..4 {
                            for kk in 0..2 {
                                let Some(q) = self.eq[conn[b]][kk] else {
                                    continue;
                                };
                                if p <= q {
                                    // Symmetric part; exact for hyperelastic tangents.
                                    let v = if p == q {
                                        ke[2 * a + i][2 * b + kk]
                                    } else {
                                        0.5 * (ke[2 * a + i][2 * b + kk]
                                            + ke[2 * b + kk][2 * a + i])
                                    };
                                    k.add(p, q, v);
                                }
                            }
                        }
                    }
                }
            }
        }
        let nodal_residual = fint
            .iter()
            .zip(&self.loads)
            .map(|(fi, fe)| [fi[0] - load_factor * fe[0], fi[1] - load_factor * fe[1]])
            .collect();
        Ok(AssembledSystem {
            nodal_residual,
            tangent: k,
            energy,
            states,
        })
    }

    /// Gathers the free-dof part of a nodal vector.
    pub fn free_vector(&self, nodal: &[[f64; 2]]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_eq];
        for (n, v) in nodal.iter().enumerate() {
            for c in 0..2 {
                if let Some(e) = self.eq[n][c] {
                    out[e] = v[c];
                }
            }
        }
        out
    }

    fn apply_dirichlet(&self, u: &mut [[f64; 2]], load_factor: f64) {
        for d in &self.bc.dirichlet {
            u[d.node][d.comp] = load_factor * d.value;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Incremental-iterative Newton solve with `load_steps` equal increments of
/// tractions and prescribed displacements.
pub fn solve_macro(
    mesh: &MacroMesh,
    bc: &BoundaryConditions,
    provider: &Provider,
    opts: &MacroOptions,
) -> Result<MacroSolution> {
    if opts.load_steps == 0 || opts.max_iter == 0 || !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("invalid macro options {opts:?}")));
    }
    provider.validate_tags(mesh.tags())?;
    let asm = Assembler::new(mesh, bc)?;
    let mut u = vec![[0.0; 2]; mesh.node_count()];
    let mut history = Vec::with_capacity(opts.load_steps);
    let mut warnings: Vec<MacroWarning> = Vec::new();
    let mut warned = vec![false; 4 * mesh.element_count()];
    let ext_free = norm(&asm.free_vector(&asm.loads));
    let mut last = None;
    let mut final_rel = 0.0;
    let mut final_norm = 0.0;

    for step in 1..=opts.load_steps {
        let lam = step as f64 / opts.load_steps as f64;
        asm.apply_dirichlet(&mut u, lam);
        let mut norms = Vec::new();
        let mut reference = 0.0;
        let mut converged = None;
        for it in 0..=opts.max_iter {
            let sys = asm.assemble(provider, &u, lam, true)?;
            let r = asm.free_vector(&sys.nodal_residual);
            let rn = norm(&r);
            norms.push(rn);
            if it == 0 {
                reference = rn.max(1e-300);
            }
            // Round-off floor relative to the applied load scale.
            let floor = 1e-13 * (lam * ext_free).max(1e-300);
            if rn <= opts.tol * reference || rn <= floor || asm.free_dofs() == 0 {
                converged = Some(sys);
                final_rel = rn / reference;
                final_norm = rn;
                break;
            }
            if it == opts.max_iter {
                break;
            }
            let mut k = sys.tangent.expect("tangent requested");
            k.factor()?;
            let mut du: Vec<f64> = r.iter().map(|v| -v).collect();
            k.solve(&mut du);
            for (n, un) in u.iter_mut().enumerate() {
                for (c, uc) in un.iter_mut().enumerate() {
                    if let Some(e) = asm.eq[n][c] {
                        *uc += du[e];
                    }
                }
            }
        }
        let Some(sys) = converged else {
            return Err(Error::NewtonDiverged {
                iterations: opts.max_iter,
                residual: *norms.last().unwrap_or(&f64::NAN),
                context: format!(
                    " in macro load step {step}/{} (residual history {:?})",
                    opts.load_steps, norms
                ),
            });
        };
        log::debug!("load step {step}: {} Newton iterations", norms.len() - 1);
        for (q, (f, _)) in sys.states.iter().enumerate() {
            let ws = provider.extrapolation(f);
            if !ws.is_empty() && !warned[q] {
                warned[q] = true;
                let (element, gp) = (q / 4, q % 4);
                let message = ws
                    .iter()
                    .map(|w| w.to_string())
                    .collect::<Vec<_>>()
                    .join("; ");
                log::warn!("load step {step}, element {element}, Gauss point {gp}: {message}");
                warnings.push(MacroWarning {
                    step,
                    element,
                    gp,
                    message,
                });
            }
        }
        history.push(norms);
        last = Some(sys);
    }

    let sys = last.expect("at least one load step");
    let mut quadrature = Vec::with_capacity(sys.states.len());
    for (q, (f, p)) in sys.states.iter().enumerate() {
        let (element, gp) = (q / 4, q % 4);
        let s = inv2(f)?.dot(p);
        quadrature.push(QuadratureState {
            element,
            gp,
            x: asm.geom[element].position[gp],
            f: *f,
            p: *p,
            s,
        });
    }
    let mut reactions = vec![[0.0; 2]; mesh.node_count()];
    for d in &bc.dirichlet {
        reactions[d.node][d.comp] = sys.nodal_residual[d.node][d.comp];
    }
    Ok(MacroSolution {
        u,
        quadrature,
        residual_norm: final_norm,
        relative_residual: final_rel,
        newton_history: history,
        reactions,
        external: asm.loads.clone(),
        energy: sys.energy,
        warnings,
        micro_solves: provider.micro_solves(),
    })
}

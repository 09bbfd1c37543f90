//! Newton–Krylov solver for the periodic micro-equilibrium `𝔾 ∗ P(F) = 0`.

use crate::error::{Error, Result};
use crate::micro::cg::{conjugate_gradient, truncated_conjugate_gradient};
use crate::micro::field::FieldT2;
use crate::micro::problem::{check_fbar, RveProblem};
use crate::micro::spectral::Spectral;
use crate::tensor::{ddot42, Tensor2, Tensor4};

/// Newton and inner CG controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Newton stops once `‖𝔾 ∗ P‖ ≤ newton_tol · ‖𝔾 ∗ P(F̄)‖`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// CG stops once `‖r‖ ≤ cg_tol · ‖b‖`.
    pub cg_tol: f64,
    /// `None` means `10 · N1 · N2`.
    pub cg_max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-8,
            newton_max_iter: 50,
            cg_tol: 1e-10,
            cg_max_iter: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || !(self.cg_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::invalid(format!(
                "solver options must be positive: {self:?}"
            )));
        }
        if self.cg_max_iter == Some(0) {
            return Err(Error::invalid("cg_max_iter must be positive"));
        }
        Ok(())
    }
}

/// Converged micro state for one prescribed `F̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroSolution {
    /// Total deformation gradient `F = F̄ + F̃` per voxel.
    pub f: FieldT2,
    pub fbar: Tensor2,
    /// `⟨ψ⟩`.
    pub psi_bar: f64,
    /// `⟨P⟩`.
    pub pbar: Tensor2,
    /// Newton corrections applied.
    pub iterations: usize,
    /// Final `‖𝔾 ∗ P‖`.
    pub residual_norm: f64,
    /// Final `‖𝔾 ∗ P‖ / ‖𝔾 ∗ P(F̄)‖` (zero when the reference residual vanishes).
    pub relative_residual: f64,
    /// Total CG iterations spent in Newton corrections.
    pub cg_iterations: usize,
}

impl MicroSolution {
    /// `‖F − F̄‖` over the grid.
    pub fn fluctuation_norm(&self) -> f64 {
        self.f
            .iter()
            .map(|t| (*t - self.fbar).norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Reusable solver for one RVE: owns FFT plans so repeated solves skip planning.
#[derive(Debug, Clone)]
pub struct MicroSolver {
    problem: RveProblem,
    spectral: Spectral,
    opts: SolverOptions,
    /// Largest tangent entry of any phase at the identity.
    stiffness: f64,
}

/// Relative floor below which a residual is round-off, measured against
/// `‖P‖ + stiffness·‖F‖`.
const ROUNDOFF_FLOOR: f64 = 1e-13;
const MAX_BACKTRACK: usize = 30;

impl MicroSolver {
    pub fn new(problem: RveProblem, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        let spectral = Spectral::new(problem.grid());
        let mut stiffness: f64 = 0.0;
        for m in problem.materials() {
            stiffness = stiffness.max(m.tangent(&Tensor2::IDENTITY)?.max_abs());
        }
        Ok(MicroSolver {
            problem,
            spectral,
            opts,
            stiffness,
        })
    }

    pub fn problem(&self) -> &RveProblem {
        &self.problem
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    fn cg_max_iter(&self) -> usize {
        self.opts
            .cg_max_iter
            .unwrap_or(10 * self.problem.grid().voxel_count())
    }

    fn voxel_error(&self, idx: usize, det: f64) -> Error {
        let grid = self.problem.grid();
        let (j1, j2) = grid.unravel(idx);
        let x = grid.center(j1, j2);
        Error::NonPositiveJacobian {
            det,
            location: format!("voxel ({j1}, {j2}) at X = ({:.6}, {:.6})", x[0], x[1]),
        }
    }

    /// Per-voxel stress field.
    pub fn stress_field(&self, f: &FieldT2) -> Result<FieldT2> {
        let mut out = f.clone();
        for (idx, (p, ft)) in out.as_mut_slice().iter_mut().zip(f.iter()).enumerate() {
            *p = self
                .problem
                .material_at(idx)
                .stress(ft)
                .map_err(|_| self.voxel_error(idx, ft.det()))?;
        }
        Ok(out)
    }

    fn stress_tangent_fields(&self, f: &FieldT2) -> Result<(FieldT2, Vec<Tensor4>)> {
        let mut p = f.clone();
        let mut k = Vec::with_capacity(f.len());
        for (idx, (pv, ft)) in p.as_mut_slice().iter_mut().zip(f.iter()).enumerate() {
            let (s, c) = self
                .problem
                .material_at(idx)
                .stress_tangent(ft)
                .map_err(|_| self.voxel_error(idx, ft.det()))?;
            *pv = s;
            k.push(c);
        }
        Ok((p, k))
    }

    /// Volume-averaged energy, `None` if some voxel has `det F ≤ 0`.
    fn mean_energy(&self, f: &FieldT2) -> Result<Option<f64>> {
        let mut sum = 0.0;
        for (idx, ft) in f.iter().enumerate() {
            if !(ft.det() > 0.0) {
                return Ok(None);
            }
            sum += self.problem.material_at(idx).energy(ft)?;
        }
        Ok(Some(sum / f.len() as f64))
    }

    /// `𝔾 ∗ P(F)`.
    pub fn residual(&self, f: &FieldT2) -> Result<FieldT2> {
        if f.shape() != self.problem.grid().n() {
            return Err(Error::invalid("field shape does not match the RVE grid"));
        }
        let p = self.stress_field(f)?;
        Ok(self.spectral.project(&p))
    }

    /// Solves `𝔾 ∗ (K : x) = b` for `x` with `⟨x⟩ = 0`. Newton directions may
    /// stop on negative curvature; tangent sensitivities may not.
    fn solve_linearized(
        &self,
        k: &[Tensor4],
        b: &FieldT2,
        x: &mut FieldT2,
        newton: bool,
    ) -> Result<usize> {
        let mut work = b.clone();
        let solve = if newton {
            truncated_conjugate_gradient::<&mut dyn FnMut(&FieldT2, &mut FieldT2)>
        } else {
            conjugate_gradient::<&mut dyn FnMut(&FieldT2, &mut FieldT2)>
        };
        let out = solve(
            &mut |v, av| {
                for ((w, kv), vv) in work.as_mut_slice().iter_mut().zip(k).zip(v.iter()) {
                    *w = ddot42(kv, vv);
                }
                self.spectral.project_into(&work, av);
            },
            b,
            x,
            self.opts.cg_tol,
            self.cg_max_iter(),
        )?;
        Ok(out.iterations)
    }

    /// Newton iteration on the fluctuation `F̃`, starting from `F̃ = 0`.
    pub fn solve(&self, fbar: &Tensor2) -> Result<MicroSolution> {
        self.solve_from(fbar, None)
    }

    /// As [`Self::solve`], optionally warm-started from a previous total field
    /// whose fluctuation `F − ⟨F⟩` is reused.
    pub fn solve_from(&self, fbar: &Tensor2, warm: Option<&FieldT2>) -> Result<MicroSolution> {
        check_fbar(fbar)?;
        let grid = self.problem.grid();
        let mut f = FieldT2::constant(grid, *fbar);
        let reference = self.residual(&f)?.norm();
        if let Some(prev) = warm {
            if prev.shape() != grid.n() {
                return Err(Error::invalid(
                    "warm-start field shape does not match the RVE grid",
                ));
            }
            let mean = prev.mean();
            let candidate: Vec<Tensor2> = prev.iter().map(|t| *fbar + (*t - mean)).collect();
            let candidate = FieldT2::from_vec(grid, candidate)?;
            if candidate.iter().all(|t| t.det() > 0.0) {
                f = candidate;
            }
        }

        let mut iterations = 0;
        let mut cg_iterations = 0;
        let mut delta = FieldT2::zeros(grid);
        loop {
            let (p, k) = self.stress_tangent_fields(&f)?;
            let r = self.spectral.project(&p);
            let res = r.norm();
            let floor = ROUNDOFF_FLOOR * (p.norm() + self.stiffness * f.norm());
            if res <= self.opts.newton_tol * reference || res <= floor {
                return self.finish(f, *fbar, iterations, cg_iterations, res, reference);
            }
            if iterations >= self.opts.newton_max_iter {
                return Err(Error::NewtonDiverged {
                    iterations,
                    residual: res,
                    context: format!(" in micro solve at Fbar = {fbar}"),
                });
            }
            let mut rhs = r;
            for v in rhs.as_mut_slice() {
                *v = -*v;
            }
            cg_iterations += self.solve_linearized(&k, &rhs, &mut delta, true)?;

            // Backtrack from the full step until no voxel inverts and either the
            // mean energy satisfies the Armijo condition (with round-off slack)
            // or the residual norm decreases sufficiently.
            let energy = self
                .mean_energy(&f)?
                .expect("current iterate is admissible");
            let slope = p.dot(&delta) / p.len() as f64;
            // The energy cancels terms of size |P||F|, so that sets its round-off.
            let slack = 1e-12 * (energy.abs() + p.norm() * f.norm() / p.len() as f64);
            let mut step = 1.0;
            let mut accepted = false;
            let mut trial = f.clone();
            for _ in 0..MAX_BACKTRACK {
                for ((t, ft), d) in trial
                    .as_mut_slice()
                    .iter_mut()
                    .zip(f.iter())
                    .zip(delta.iter())
                {
                    *t = *ft + *d * step;
                }
                if let Some(e) = self.mean_energy(&trial)? {
                    if e <= energy + 1e-4 * step * slope.min(0.0) + slack
                        || self.residual(&trial)?.norm() <= (1.0 - 1e-4 * step) * res
                    {
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                let worst = f
                    .iter()
                    .zip(delta.iter())
                    .enumerate()
                    .map(|(i, (ft, d))| (i, (*ft + *d).det()))
                    .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                if worst.1 <= 0.0 {
                    return Err(self.voxel_error(worst.0, worst.1));
                }
                return Err(Error::NewtonDiverged {
                    iterations,
                    residual: res,
                    context: format!(" in micro solve at Fbar = {fbar}: line search failed"),
                });
            }
            f = trial;
            iterations += 1;
        }
    }

    fn finish(
        &self,
        f: FieldT2,
        fbar: Tensor2,
        iterations: usize,
        cg_iterations: usize,
        res: f64,
        reference: f64,
    ) -> Result<MicroSolution> {
        let n = f.len() as f64;
        let mut psi = 0.0;
        let mut pbar = Tensor2::ZERO;
        for (idx, ft) in f.iter().enumerate() {
            let m = self.problem.material_at(idx);
            psi += m.energy(ft)?;
            pbar += m.stress(ft)?;
        }
        Ok(MicroSolution {
            fbar,
            psi_bar: psi / n,
            pbar: pbar * (1.0 / n),
            iterations,
            residual_norm: res,
            relative_residual: if reference > 0.0 {
                res / reference
            } else {
                0.0
            },
            cg_iterations,
            f,
        })
    }

    /// Homogenized tangent `ℂ̄ = ⟨K : (𝕀 + ∂F̃/∂F̄)⟩` from the four fluctuation
    /// sensitivities `𝔾 ∗ (K : S_kl) = −𝔾 ∗ (K : E_kl)`.
    pub fn macro_tangent(&self, sol: &MicroSolution) -> Result<Tensor4> {
        let grid = self.problem.grid();
        let (_, k) = self.stress_tangent_fields(&sol.f)?;
        let n = k.len() as f64;
        let mut out = Tensor4::ZERO;
        let mut sens = FieldT2::zeros(grid);
        let mut load = FieldT2::zeros(grid);
        for kk in 0..2 {
            for ll in 0..2 {
                let e = Tensor2::unit(kk, ll);
                for (w, kv) in load.as_mut_slice().iter_mut().zip(&k) {
                    *w = ddot42(kv, &e);
                }
                let mut rhs = self.spectral.project(&load);
                for v in rhs.as_mut_slice() {
                    *v = -*v;
                }
                self.solve_linearized(&k, &rhs, &mut sens, false)?;
                let mut col = Tensor2::ZERO;
                for (kv, s) in k.iter().zip(sens.iter()) {
                    col += ddot42(kv, &(e + *s));
                }
                out.set_column(kk, ll, &(col * (1.0 / n)));
            }
        }
        Ok(out)
    }
}

/// Solves one micro problem with freshly planned transforms.
pub fn solve_micro(
    problem: &RveProblem,
    fbar: &Tensor2,
    opts: &SolverOptions,
) -> Result<MicroSolution> {
    MicroSolver::new(problem.clone(), *opts)?.solve(fbar)
}

/// Homogenized tangent for a converged solution of `problem`.
pub fn macro_tangent(
    problem: &RveProblem,
    sol: &MicroSolution,
    opts: &SolverOptions,
) -> Result<Tensor4> {
    MicroSolver::new(problem.clone(), *opts)?.macro_tangent(sol)
}

/// `𝔾 ∗ P(F)` for a trial field.
pub fn residual(problem: &RveProblem, f: &FieldT2) -> Result<FieldT2> {
    MicroSolver::new(problem.clone(), SolverOptions::default())?.residual(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{Material, NeoHookeanA, NeoHookeanB};
    use crate::micro::problem::RveGrid;

    fn laminate(n: usize) -> RveProblem {
        let m1: Material = NeoHookeanA::new(100.0, 1.0).unwrap().into();
        let m2: Material = NeoHookeanA::new(1000.0, 1.0).unwrap().into();
        RveProblem::laminate(RveGrid::square(n).unwrap(), m1, m2)
    }

    #[test]
    fn homogeneous_rve_needs_no_correction() {
        let m: Material = NeoHookeanB::new(100.0, 0.4).unwrap().into();
        let p = RveProblem::homogeneous(RveGrid::square(9).unwrap(), m);
        let fbar = Tensor2::from_rows([[1.1, 0.2], [-0.1, 0.95]]);
        let sol = solve_micro(&p, &fbar, &SolverOptions::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!(sol.fluctuation_norm() < 1e-14);
        assert!((sol.psi_bar - m.energy(&fbar).unwrap()).abs() < 1e-12);
        assert!((sol.pbar - m.stress(&fbar).unwrap()).max_abs() < 1e-12);
        let c = macro_tangent(&p, &sol, &SolverOptions::default()).unwrap();
        assert!((c - m.tangent(&fbar).unwrap()).max_abs() < 1e-10);
    }

    #[test]
    fn laminate_at_identity_is_stress_free() {
        let p = laminate(9);
        let sol = solve_micro(&p, &Tensor2::IDENTITY, &SolverOptions::default()).unwrap();
        assert_eq!(sol.psi_bar, 0.0);
        assert!(sol.f.iter().all(|t| *t == Tensor2::IDENTITY));
        let r = residual(&p, &FieldT2::constant(p.grid(), Tensor2::IDENTITY)).unwrap();
        assert_eq!(r.norm(), 0.0);
    }

    #[test]
    fn laminate_residual_decreases_under_newton() {
        let p = laminate(9);
        let fbar = Tensor2::diag(1.2, 1.2);
        let r0 = residual(&p, &FieldT2::constant(p.grid(), fbar))
            .unwrap()
            .norm();
        assert!(r0 > 1.0);
        let sol = solve_micro(&p, &fbar, &SolverOptions::default()).unwrap();
        assert!(sol.iterations >= 1);
        assert!(sol.residual_norm < 1e-8 * r0);
        assert!((sol.f.mean() - fbar).max_abs() < 1e-10);
    }

    #[test]
    fn inverted_fbar_is_rejected() {
        let p = laminate(5);
        let res = solve_micro(&p, &Tensor2::diag(-1.0, 1.0), &SolverOptions::default());
        assert!(matches!(res, Err(Error::NonPositiveJacobian { .. })));
    }

    #[test]
    fn voxel_location_reported_for_bad_field() {
        let p = laminate(5);
        let mut f = FieldT2::constant(p.grid(), Tensor2::IDENTITY);
        f[7] = Tensor2::diag(1.0, -1.0);
        match residual(&p, &f) {
            Err(Error::NonPositiveJacobian { location, .. }) => {
                assert!(location.contains("(1, 2)"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn newton_budget_exhaustion_is_reported() {
        let p = laminate(9);
        let opts = SolverOptions {
            newton_max_iter: 1,
            newton_tol: 1e-14,
            ..SolverOptions::default()
        };
        let res = solve_micro(&p, &Tensor2::from_rows([[1.3, 0.2], [-0.2, 1.1]]), &opts);
        assert!(matches!(res, Err(Error::NewtonDiverged { .. })));
    }

    #[test]
    fn warm_start_reproduces_cold_solution() {
        let p = laminate(11);
        let solver = MicroSolver::new(p, SolverOptions::default()).unwrap();
        let a = Tensor2::from_rows([[1.2, 0.1], [-0.2, 1.2]]);
        let b = Tensor2::from_rows([[1.22, 0.1], [-0.18, 1.19]]);
        let sa = solver.solve(&a).unwrap();
        let cold = solver.solve(&b).unwrap();
        let warm = solver.solve_from(&b, Some(&sa.f)).unwrap();
        assert!(warm.iterations <= cold.iterations);
        assert!((warm.psi_bar - cold.psi_bar).abs() < 1e-9 * cold.psi_bar.abs());
        assert!((warm.pbar - cold.pbar).max_abs() < 1e-7 * cold.pbar.max_abs());
    }
}

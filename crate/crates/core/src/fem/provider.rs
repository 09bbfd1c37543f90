use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::materials::Material;
use crate::micro::{FieldT2, MicroSolver, RveProblem, SolverOptions};
use crate::surrogate::{ExtrapolationWarning, HdmrModel};
use crate::tensor::{Tensor2, Tensor4};

/// Stress, tangent and energy at one quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResponse {
    pub energy: f64,
    pub stress: Tensor2,
    pub tangent: Tensor4,
}

/// Largest micro Newton tolerance used by [`NestedProvider`].
pub const NESTED_NEWTON_TOL: f64 = 1e-11;

/// Two-scale provider: one periodic micro-solve per quadrature point.
#[derive(Debug)]
pub struct NestedProvider {
    solver: MicroSolver,
    warm_start: bool,
    solves: AtomicUsize,
    history: Mutex<Vec<Option<FieldT2>>>,
}

impl NestedProvider {
    /// The micro Newton tolerance is capped at [`NESTED_NEWTON_TOL`] so that the
    /// homogenized stress is resolved below the macro Newton tolerance.
    pub fn new(problem: RveProblem, opts: SolverOptions, warm_start: bool) -> Result<Self> {
        let opts = SolverOptions {
            newton_tol: opts.newton_tol.min(NESTED_NEWTON_TOL),
            ..opts
        };
        Ok(NestedProvider {
            solver: MicroSolver::new(problem, opts)?,
            warm_start,
            solves: AtomicUsize::new(0),
            history: Mutex::new(Vec::new()),
        })
    }

    /// Micro-solves performed so far.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn problem(&self) -> &RveProblem {
        self.solver.problem()
    }

    fn respond(&self, qp: usize, f: &Tensor2, with_tangent: bool) -> Result<PointResponse> {
        let warm = if self.warm_start {
            self.history
                .lock()
                .expect("history lock")
                .get_mut(qp)
                .and_then(Option::take)
        } else {
            None
        };
        let sol = self.solver.solve_from(f, warm.as_ref())?;
        let tangent = if with_tangent {
            self.solver.macro_tangent(&sol)?
        } else {
            Tensor4::ZERO
        };
        self.solves.fetch_add(1, Ordering::Relaxed);
        let out = PointResponse {
            energy: sol.psi_bar,
            stress: sol.pbar,
            tangent,
        };
        if self.warm_start {
            let mut h = self.history.lock().expect("history lock");
            if h.len() <= qp {
                h.resize(qp + 1, None);
            }
            h[qp] = Some(sol.f);
        }
        Ok(out)
    }
}

/// Constitutive source for the macro solver.
#[derive(Debug)]
pub enum Provider {
    /// Trained HDMR surrogate: analytical gradient and Hessian.
    Surrogate(HdmrModel),
    /// FE-FFT: micro-solve at every quadrature point.
    Nested(NestedProvider),
    /// Closed-form material, indexed by element tag.
    Direct(Vec<Material>),
}

/// A quadrature-point evaluation request.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointQuery {
    pub qp: usize,
    pub tag: usize,
    pub f: Tensor2,
}

impl Provider {
    pub fn name(&self) -> &'static str {
        match self {
            Provider::Surrogate(_) => "surrogate",
            Provider::Nested(_) => "nested",
            Provider::Direct(_) => "direct",
        }
    }

    /// Micro-solves performed (nested provider only).
    pub fn micro_solves(&self) -> usize {
        match self {
            Provider::Nested(n) => n.solve_count(),
            _ => 0,
        }
    }

    /// Response at quadrature point `qp` (an index used for warm starts) of an
    /// element with material `tag`.
    pub fn respond(&self, qp: usize, tag: usize, f: &Tensor2) -> Result<PointResponse> {
        self.respond_with(qp, tag, f, true)
    }

    /// As [`Self::respond`]; the nested provider skips its tangent solves when
    /// `with_tangent` is false and returns a zero tangent.
    pub fn respond_with(
        &self,
        qp: usize,
        tag: usize,
        f: &Tensor2,
        with_tangent: bool,
    ) -> Result<PointResponse> {
        if f.det() <= 0.0 {
            return Err(Error::NonPositiveJacobian {
                det: f.det(),
                location: "macro quadrature point".into(),
            });
        }
        match self {
            Provider::Surrogate(m) => {
                let (energy, stress, tangent) = m.response(f)?;
                Ok(PointResponse {
                    energy,
                    stress,
                    tangent,
                })
            }
            Provider::Nested(n) => n.respond(qp, f, with_tangent),
            Provider::Direct(mats) => {
                let m = mats
                    .get(tag)
                    .ok_or_else(|| Error::invalid(format!("no direct material for tag {tag}")))?;
                let r = m.response(f)?;
                Ok(PointResponse {
                    energy: r.energy,
                    stress: r.stress,
                    tangent: r.tangent,
                })
            }
        }
    }

    /// Extrapolation warnings for a surrogate input; empty for other providers.
    pub fn extrapolation(&self, f: &Tensor2) -> Vec<ExtrapolationWarning> {
        match self {
            Provider::Surrogate(m) => m.extrapolation(&f.flatten()),
            _ => Vec::new(),
        }
    }

    /// Evaluates a batch in parallel; results keep query order.
    pub(crate) fn respond_batch(
        &self,
        queries: &[PointQuery],
        with_tangent: bool,
    ) -> Vec<Result<PointResponse>> {
        queries
            .par_iter()
            .map(|q| self.respond_with(q.qp, q.tag, &q.f, with_tangent))
            .collect()
    }

    pub(crate) fn validate_tags(&self, tags: &[usize]) -> Result<()> {
        if let Provider::Direct(mats) = self {
            if let Some(t) = tags.iter().find(|&&t| t >= mats.len()) {
                return Err(Error::invalid(format!(
                    "element tag {t} has no direct material ({} given)",
                    mats.len()
                )));
            }
        }
        if let Provider::Surrogate(m) = self {
            if m.input_dim() != 4 {
                return Err(Error::invalid(
                    "macro solves need a surrogate with four inputs",
                ));
            }
        }
        Ok(())
    }
}

use crate::error::{Error, Result};
use crate::micro::field::FieldT2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `‖b − A x‖ / ‖b‖` at exit.
    pub relative_residual: f64,
    /// Stopped early on negative curvature (see [`truncated_conjugate_gradient`]).
    pub truncated: bool,
}

/// Unpreconditioned conjugate gradient for a symmetric operator on tensor fields,
/// started from `x = 0`. Stops when `‖r‖ ≤ tol ‖b‖`. A curvature breakdown
/// (`pᵀAp ≤ 0`) is accepted once `‖r‖ ≤ √tol ‖b‖`: the operator is only
/// semi-definite and round-off leaks the search direction into its null space.
pub fn conjugate_gradient<A>(
    apply: A,
    b: &FieldT2,
    x: &mut FieldT2,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    A: FnMut(&FieldT2, &mut FieldT2),
{
    cg(apply, b, x, tol, max_iter, false)
}

/// As [`conjugate_gradient`], but negative curvature after at least one step
/// returns the current iterate instead of failing. Used for Newton directions,
/// where the iterate is still a descent direction.
pub fn truncated_conjugate_gradient<A>(
    apply: A,
    b: &FieldT2,
    x: &mut FieldT2,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    A: FnMut(&FieldT2, &mut FieldT2),
{
    cg(apply, b, x, tol, max_iter, true)
}

fn cg<A>(
    mut apply: A,
    b: &FieldT2,
    x: &mut FieldT2,
    tol: f64,
    max_iter: usize,
    truncate: bool,
) -> Result<CgOutcome>
where
    A: FnMut(&FieldT2, &mut FieldT2),
{
    for v in x.as_mut_slice() {
        *v = crate::tensor::Tensor2::ZERO;
    }
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
            truncated: false,
        });
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = b.clone();
    let mut rr = r.dot(&r);
    let target = (tol * b_norm).powi(2);
    for it in 0..max_iter {
        if rr <= target {
            return Ok(CgOutcome {
                iterations: it,
                relative_residual: rr.sqrt() / b_norm,
                truncated: false,
            });
        }
        apply(&p, &mut ap);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            let rel = rr.sqrt() / b_norm;
            if rel <= tol.sqrt() || (truncate && it > 0) {
                return Ok(CgOutcome {
                    iterations: it,
                    relative_residual: rel,
                    truncated: rel > tol.sqrt(),
                });
            }
            return Err(Error::CgStalled {
                iterations: it,
                residual: rr.sqrt() / b_norm,
            });
        }
        let alpha = rr / pap;
        for ((xi, pi), (ri, api)) in x
            .as_mut_slice()
            .iter_mut()
            .zip(p.as_slice())
            .zip(r.as_mut_slice().iter_mut().zip(ap.as_slice()))
        {
            *xi += *pi * alpha;
            *ri -= *api * alpha;
        }
        let rr_new = r.dot(&r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.as_mut_slice().iter_mut().zip(r.as_slice()) {
            *pi = *ri + *pi * beta;
        }
    }
    if rr <= target {
        return Ok(CgOutcome {
            iterations: max_iter,
            relative_residual: rr.sqrt() / b_norm,
            truncated: false,
        });
    }
    Err(Error::CgStalled {
        iterations: max_iter,
        residual: rr.sqrt() / b_norm,
    })
}

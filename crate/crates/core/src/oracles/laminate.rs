use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::materials::Material;
use crate::micro::RveProblem;
use crate::tensor::Tensor2;

/// Two phases layered normal to `X1`. `fraction` is the volume share of
/// `material1`; the classical laminate has `fraction = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaminateProblem {
    pub material1: Material,
    pub material2: Material,
    pub fraction: f64,
}

/// Phase-wise constant solution of the laminate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaminateState {
    pub f1: Tensor2,
    pub f2: Tensor2,
    pub iterations: usize,
    /// Max-norm of the four nonlinear residuals at exit.
    pub residual: f64,
}

impl LaminateProblem {
    /// Equal volume fractions.
    pub fn new(material1: Material, material2: Material) -> Self {
        LaminateProblem {
            material1,
            material2,
            fraction: 0.5,
        }
    }

    pub fn with_fraction(material1: Material, material2: Material, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid(format!(
                "volume fraction {fraction} outside (0, 1)"
            )));
        }
        Ok(LaminateProblem {
            material1,
            material2,
            fraction,
        })
    }

    /// Laminate matching a pixelized RVE built by [`RveProblem::laminate`],
    /// using its realized volume fraction.
    pub fn matching(rve: &RveProblem) -> Result<Self> {
        let mats = rve.materials();
        if mats.len() != 2 {
            return Err(Error::invalid("laminate RVE must have two phases"));
        }
        Self::with_fraction(mats[0], mats[1], rve.phases().fraction(0))
    }
}

const MAX_ITER: usize = 60;

fn build(fbar: &Tensor2, x: &Vector4<f64>) -> (Tensor2, Tensor2) {
    let f1 = Tensor2::from_rows([[x[0], fbar[(0, 1)]], [x[1], fbar[(1, 1)]]]);
    let f2 = Tensor2::from_rows([[x[2], fbar[(0, 1)]], [x[3], fbar[(1, 1)]]]);
    (f1, f2)
}

fn residual(p: &LaminateProblem, fbar: &Tensor2, x: &Vector4<f64>) -> Result<Vector4<f64>> {
    let (f1, f2) = build(fbar, x);
    let p1 = p.material1.stress(&f1)?;
    let p2 = p.material2.stress(&f2)?;
    let w = p.fraction;
    Ok(Vector4::new(
        w * x[0] + (1.0 - w) * x[2] - fbar[(0, 0)],
        w * x[1] + (1.0 - w) * x[3] - fbar[(1, 0)],
        p1[(0, 0)] - p2[(0, 0)],
        p1[(1, 0)] - p2[(1, 0)],
    ))
}

/// Solves the laminate compatibility and traction-continuity system for the
/// phase deformation gradients. The normal-direction columns `F·2` equal
/// those of `F̄`; `F11`, `F21` are found by damped Newton from `F⁽ⁱ⁾ = F̄`.
pub fn laminate_solve(p: &LaminateProblem, fbar: &Tensor2) -> Result<LaminateState> {
    crate::micro::check_fbar(fbar)?;
    let w = p.fraction;
    let mut x = Vector4::new(fbar[(0, 0)], fbar[(1, 0)], fbar[(0, 0)], fbar[(1, 0)]);
    let mut r = residual(p, fbar, &x)?;
    let mut iterations = 0;
    let scale = 1.0 + p.material1.stress(fbar)?.max_abs() + p.material2.stress(fbar)?.max_abs();
    while iterations < MAX_ITER {
        if r.amax() <= 1e-15 * scale {
            break;
        }
        let (f1, f2) = build(fbar, &x);
        let c1 = p.material1.tangent(&f1)?;
        let c2 = p.material2.tangent(&f2)?;
        // Unknown order: F11⁽¹⁾, F21⁽¹⁾, F11⁽²⁾, F21⁽²⁾.
        #[rustfmt::skip]
        let jac = Matrix4::new(
            w, 0.0, 1.0 - w, 0.0,
            0.0, w, 0.0, 1.0 - w,
            c1[(0, 0, 0, 0)], c1[(0, 0, 1, 0)], -c2[(0, 0, 0, 0)], -c2[(0, 0, 1, 0)],
            c1[(1, 0, 0, 0)], c1[(1, 0, 1, 0)], -c2[(1, 0, 0, 0)], -c2[(1, 0, 1, 0)],
        );
        let dx = jac
            .lu()
            .solve(&(-r))
            .ok_or(Error::SingularTensor { det: 0.0 })?;
        let mut step = 1.0;
        let mut next = None;
        for _ in 0..30 {
            let trial = x + dx * step;
            let (t1, t2) = build(fbar, &trial);
            if t1.det() > 0.0 && t2.det() > 0.0 {
                let rt = residual(p, fbar, &trial)?;
                if rt.amax() < r.amax() || step < 1e-6 {
                    next = Some((trial, rt));
                    break;
                }
            }
            step *= 0.5;
        }
        iterations += 1;
        match next {
            Some((xt, rt)) => {
                let stalled = rt.amax() >= r.amax();
                x = xt;
                r = rt;
                if stalled {
                    break;
                }
            }
            None => break,
        }
    }
    let tol = 1e-12 * scale;
    if !(r.amax() <= tol) {
        return Err(Error::NewtonDiverged {
            iterations,
            residual: r.amax(),
            context: format!(" in laminate system at Fbar = {fbar}"),
        });
    }
    let (f1, f2) = build(fbar, &x);
    Ok(LaminateState {
        f1,
        f2,
        iterations,
        residual: r.amax(),
    })
}

/// Effective energy and stress: volume-weighted phase averages.
pub fn laminate_energy_stress(p: &LaminateProblem, fbar: &Tensor2) -> Result<(f64, Tensor2)> {
    let s = laminate_solve(p, fbar)?;
    let w = p.fraction;
    let psi = w * p.material1.energy(&s.f1)? + (1.0 - w) * p.material2.energy(&s.f2)?;
    let pbar = p.material1.stress(&s.f1)? * w + p.material2.stress(&s.f2)? * (1.0 - w);
    Ok((psi, pbar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::NeoHookeanA;
    use crate::oracles::central_diff_tangent;

    fn lam() -> LaminateProblem {
        LaminateProblem::new(
            NeoHookeanA::new(100.0, 1.0).unwrap().into(),
            NeoHookeanA::new(1000.0, 1.0).unwrap().into(),
        )
    }

    #[test]
    fn identity_is_stress_free() {
        let s = laminate_solve(&lam(), &Tensor2::IDENTITY).unwrap();
        assert_eq!(s.f1, Tensor2::IDENTITY);
        assert_eq!(s.f2, Tensor2::IDENTITY);
        let (psi, p) = laminate_energy_stress(&lam(), &Tensor2::IDENTITY).unwrap();
        assert_eq!(psi, 0.0);
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn soft_phase_stretches_more() {
        let p = lam();
        let fbar = Tensor2::diag(1.2, 1.2);
        let s = laminate_solve(&p, &fbar).unwrap();
        assert!(s.f1[(0, 0)] > 1.2 && s.f2[(0, 0)] < 1.2);
        let p1 = p.material1.stress(&s.f1).unwrap();
        let p2 = p.material2.stress(&s.f2).unwrap();
        assert!((p1[(0, 0)] - p2[(0, 0)]).abs() < 1e-12);
        assert!((p1[(1, 0)] - p2[(1, 0)]).abs() < 1e-12);
        assert!((0.5 * (s.f1[(0, 0)] + s.f2[(0, 0)]) - 1.2).abs() < 1e-14);
    }

    #[test]
    fn equal_phases_give_uniform_state() {
        let m: Material = NeoHookeanA::new(300.0, 1.0).unwrap().into();
        let p = LaminateProblem::new(m, m);
        let fbar = Tensor2::from_rows([[1.1, -0.2], [0.25, 0.85]]);
        let s = laminate_solve(&p, &fbar).unwrap();
        assert!((s.f1 - fbar).max_abs() < 1e-14 && (s.f2 - fbar).max_abs() < 1e-14);
    }

    #[test]
    fn stress_is_energy_gradient_and_tangent_is_symmetric() {
        let p = lam();
        let fbar = Tensor2::from_rows([[1.2, 0.1], [-0.2, 1.2]]);
        let (_, pbar) = laminate_energy_stress(&p, &fbar).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            for l in 0..2 {
                let e = Tensor2::unit(k, l) * h;
                let plus = laminate_energy_stress(&p, &(fbar + e)).unwrap().0;
                let minus = laminate_energy_stress(&p, &(fbar - e)).unwrap().0;
                let fd = (plus - minus) / (2.0 * h);
                assert!((fd - pbar[(k, l)]).abs() < 1e-5 * pbar.max_abs());
            }
        }
        let c = central_diff_tangent(
            |f: &Tensor2| Ok(laminate_energy_stress(&p, f)?.1),
            &fbar,
            1e-6,
        )
        .unwrap();
        assert!(c.major_asymmetry() < 1e-6 * c.max_abs());
    }

    #[test]
    fn inadmissible_fbar_is_rejected() {
        assert!(laminate_solve(&lam(), &Tensor2::diag(1.0, -1.0)).is_err());
        assert!(LaminateProblem::with_fraction(lam().material1, lam().material2, 1.0).is_err());
    }
}

use crate::error::{Error, Result};
use crate::tensor::{Tensor2, Tensor4};

/// Tangent by central differences of a stress map:
/// `C_ijkl ≈ [P_ij(F̄ + ε E_kl) − P_ij(F̄ − ε E_kl)] / 2ε`.
pub fn central_diff_tangent<S>(mut stress_fn: S, fbar: &Tensor2, eps: f64) -> Result<Tensor4>
where
    S: FnMut(&Tensor2) -> Result<Tensor2>,
{
    if !(1e-8..=1e-3).contains(&eps) {
        return Err(Error::invalid(format!(
            "difference step {eps} outside [1e-8, 1e-3]"
        )));
    }
    let mut c = Tensor4::ZERO;
    for k in 0..2 {
        for l in 0..2 {
            let e = Tensor2::unit(k, l) * eps;
            let plus = stress_fn(&(*fbar + e))?;
            let minus = stress_fn(&(*fbar - e))?;
            c.set_column(k, l, &((plus - minus) * (0.5 / eps)));
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{Material, NeoHookeanB};

    #[test]
    fn matches_closed_form_and_converges_at_second_order() {
        let m: Material = NeoHookeanB::new(100.0, 0.4).unwrap().into();
        let f = Tensor2::from_rows([[1.15, 0.2], [-0.1, 0.9]]);
        let exact = m.tangent(&f).unwrap();
        let fd = |eps| central_diff_tangent(|x: &Tensor2| m.stress(x), &f, eps).unwrap();
        let e1 = (fd(1e-4) - exact).max_abs();
        let e2 = (fd(5e-5) - exact).max_abs();
        assert!(e1 < 1e-4 * exact.max_abs());
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn step_outside_range_is_rejected() {
        let f = Tensor2::IDENTITY;
        assert!(central_diff_tangent(|x: &Tensor2| Ok(*x), &f, 1e-2).is_err());
        assert!(central_diff_tangent(|x: &Tensor2| Ok(*x), &f, 1e-9).is_err());
    }
}

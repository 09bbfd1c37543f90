//! Compressible Neo-Hookean energy densities with closed-form stress and tangent.

use crate::error::{Error, Result};
use crate::tensor::{det2, inv2, Tensor2, Tensor4};

/// `ψ(F) = μ/2 [tr(FᵀF) − 2] + μ/β [det(F)^(−β) − 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeoHookeanA {
    mu: f64,
    beta: f64,
}

/// `ψ(C) = λ/2 (log J)² − μ log J + μ/2 [tr(C) − 2]` with Lamé constants from `(E, ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeoHookeanB {
    young: f64,
    poisson: f64,
    lambda: f64,
    mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Material {
    NeoHookeanA(NeoHookeanA),
    NeoHookeanB(NeoHookeanB),
}

/// Energy, first Piola–Kirchhoff stress and tangent at one deformation gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub energy: f64,
    pub stress: Tensor2,
    pub tangent: Tensor4,
}

impl NeoHookeanA {
    pub fn new(mu: f64, beta: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!(
                "NeoHookeanA requires mu > 0 and beta > 0 (got mu={mu}, beta={beta})"
            )));
        }
        Ok(NeoHookeanA { mu, beta })
    }

    /// Uses `β = 2ν / (1 − ν)`.
    pub fn from_poisson(mu: f64, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::invalid(format!(
                "Poisson ratio must lie in (0, 1) to derive beta (got {nu})"
            )));
        }
        Self::new(mu, 2.0 * nu / (1.0 - nu))
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl NeoHookeanB {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0 && young.is_finite()) || !(poisson > 0.0 && poisson < 0.5) {
            return Err(Error::invalid(format!(
                "NeoHookeanB requires E > 0 and 0 < nu < 0.5 (got E={young}, nu={poisson})"
            )));
        }
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        let mu = young / (2.0 * (1.0 + poisson));
        Ok(NeoHookeanB {
            young,
            poisson,
            lambda,
            mu,
        })
    }

    pub fn young(&self) -> f64 {
        self.young
    }

    pub fn poisson(&self) -> f64 {
        self.poisson
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl From<NeoHookeanA> for Material {
    fn from(m: NeoHookeanA) -> Self {
        Material::NeoHookeanA(m)
    }
}

impl From<NeoHookeanB> for Material {
    fn from(m: NeoHookeanB) -> Self {
        Material::NeoHookeanB(m)
    }
}

fn admissible(f: &Tensor2) -> Result<(f64, Tensor2)> {
    let j = det2(f);
    if !(j > 0.0) {
        return Err(Error::NonPositiveJacobian {
            det: j,
            location: "material point".into(),
        });
    }
    Ok((j, inv2(f)?))
}

impl Material {
    pub fn energy(&self, f: &Tensor2) -> Result<f64> {
        let (j, _) = admissible(f)?;
        let c_trace = f.ddot(f);
        Ok(match self {
            Material::NeoHookeanA(m) => {
                0.5 * m.mu * (c_trace - 2.0) + m.mu / m.beta * (j.powf(-m.beta) - 1.0)
            }
            Material::NeoHookeanB(m) => {
                let lj = j.ln();
                0.5 * m.lambda * lj * lj - m.mu * lj + 0.5 * m.mu * (c_trace - 2.0)
            }
        })
    }

    pub fn stress(&self, f: &Tensor2) -> Result<Tensor2> {
        let (j, finv) = admissible(f)?;
        Ok(self.stress_with(f, j, &finv))
    }

    pub fn tangent(&self, f: &Tensor2) -> Result<Tensor4> {
        let (j, finv) = admissible(f)?;
        Ok(self.tangent_with(j, &finv))
    }

    /// Energy, stress and tangent sharing one inverse.
    pub fn response(&self, f: &Tensor2) -> Result<Response> {
        let (j, finv) = admissible(f)?;
        Ok(Response {
            energy: self.energy(f)?,
            stress: self.stress_with(f, j, &finv),
            tangent: self.tangent_with(j, &finv),
        })
    }

    /// Stress and tangent only, for the inner loops of the solvers.
    pub fn stress_tangent(&self, f: &Tensor2) -> Result<(Tensor2, Tensor4)> {
        let (j, finv) = admissible(f)?;
        Ok((self.stress_with(f, j, &finv), self.tangent_with(j, &finv)))
    }

    fn stress_with(&self, f: &Tensor2, j: f64, finv: &Tensor2) -> Tensor2 {
        let finv_t = finv.transpose();
        match self {
            Material::NeoHookeanA(m) => *f * m.mu - finv_t * (m.mu * j.powf(-m.beta)),
            Material::NeoHookeanB(m) => *f * m.mu + finv_t * (m.lambda * j.ln() - m.mu),
        }
    }

    fn tangent_with(&self, j: f64, finv: &Tensor2) -> Tensor4 {
        // (a, b, c): C_ijkl = a δ_ik δ_jl + b F⁻¹_ji F⁻¹_lk + c F⁻¹_jk F⁻¹_li
        let (a, b, c) = match self {
            Material::NeoHookeanA(m) => {
                let s = m.mu * j.powf(-m.beta);
                (m.mu, s * m.beta, s)
            }
            Material::NeoHookeanB(m) => (m.mu, m.lambda, -(m.lambda * j.ln() - m.mu)),
        };
        let mut out = Tensor4::ZERO;
        for i in 0..2 {
            for jj in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let delta = if i == k && jj == l { a } else { 0.0 };
                        out[(i, jj, k, l)] = delta
                            + b * finv[(jj, i)] * finv[(l, k)]
                            + c * finv[(jj, k)] * finv[(l, i)];
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat_a() -> Material {
        NeoHookeanA::new(100.0, 1.0).unwrap().into()
    }

    fn mat_b() -> Material {
        NeoHookeanB::new(100.0, 0.4).unwrap().into()
    }

    fn random_f(rng: &mut ChaCha8Rng) -> Tensor2 {
        loop {
            let f = Tensor2::from_rows([
                [rng.random_range(0.6..1.5), rng.random_range(-0.5..0.5)],
                [rng.random_range(-0.5..0.5), rng.random_range(0.6..1.5)],
            ]);
            let d = f.det();
            if (0.5..=2.0).contains(&d) {
                return f;
            }
        }
    }

    #[test]
    fn reference_state_is_stress_free() {
        for m in [mat_a(), mat_b()] {
            assert_eq!(m.energy(&Tensor2::IDENTITY).unwrap(), 0.0);
            assert!(m.stress(&Tensor2::IDENTITY).unwrap().max_abs() < 1e-13);
        }
    }

    #[test]
    fn hand_evaluated_values() {
        let f = Tensor2::diag(2.0, 1.0);
        assert!((mat_a().energy(&f).unwrap() - 100.0).abs() < 1e-12);
        let p = mat_a().stress(&f).unwrap();
        assert!((p - Tensor2::diag(175.0, 50.0)).max_abs() < 1e-12);

        let c = mat_b().tangent(&Tensor2::IDENTITY).unwrap();
        let (lambda, mu) = (1000.0 / 7.0, 250.0 / 7.0);
        assert!((c[(0, 0, 0, 0)] - (lambda + 2.0 * mu)).abs() < 1e-10);
        assert!((c[(0, 0, 0, 0)] - 214.285_714_285_714_3).abs() < 1e-9);

        let c = mat_a().tangent(&Tensor2::IDENTITY).unwrap();
        assert!((c[(0, 1, 0, 1)] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_route_for_variant_a() {
        let m = NeoHookeanA::from_poisson(100.0, 1.0 / 3.0).unwrap();
        assert!((m.beta() - 1.0).abs() < 1e-15);
        assert!(NeoHookeanA::from_poisson(100.0, 1.0).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(NeoHookeanA::new(-1.0, 1.0).is_err());
        assert!(NeoHookeanA::new(1.0, 0.0).is_err());
        assert!(NeoHookeanB::new(100.0, 0.5).is_err());
        assert!(NeoHookeanB::new(0.0, 0.3).is_err());
    }

    #[test]
    fn inverted_deformation_is_an_error() {
        let f = Tensor2::diag(-1.0, 1.0);
        for m in [mat_a(), mat_b()] {
            assert!(matches!(
                m.energy(&f),
                Err(Error::NonPositiveJacobian { .. })
            ));
            assert!(matches!(
                m.stress(&f),
                Err(Error::NonPositiveJacobian { .. })
            ));
            assert!(matches!(
                m.tangent(&f),
                Err(Error::NonPositiveJacobian { .. })
            ));
        }
        assert!(mat_a().energy(&Tensor2::ZERO).is_err());
    }

    #[test]
    fn stress_and_tangent_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..100 {
            let f = random_f(&mut rng);
            for m in [mat_a(), mat_b()] {
                let p = m.stress(&f).unwrap();
                let c = m.tangent(&f).unwrap();
                let mut p_fd = Tensor2::ZERO;
                let mut c_fd = Tensor4::ZERO;
                for k in 0..2 {
                    for l in 0..2 {
                        let e = Tensor2::unit(k, l) * h;
                        let (fp, fm) = (f + e, f - e);
                        p_fd[(k, l)] =
                            (m.energy(&fp).unwrap() - m.energy(&fm).unwrap()) / (2.0 * h);
                        let col = (m.stress(&fp).unwrap() - m.stress(&fm).unwrap()) * (0.5 / h);
                        c_fd.set_column(k, l, &col);
                    }
                }
                assert!(
                    (p_fd - p).max_abs() < 1e-5 * p.max_abs().max(1.0),
                    "{p:?} vs {p_fd:?}"
                );
                assert!(
                    (c_fd - c).max_abs() < 1e-4 * c.max_abs(),
                    "{c:?} vs {c_fd:?}"
                );
                assert!(c.major_asymmetry() < 1e-10 * c.max_abs());
            }
        }
    }
}

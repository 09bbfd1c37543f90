use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Bar `[0, L]` clamped at `X = 0`, end traction `t0` at `X = L`, constant
/// distributed load `f`, modulus `μ(X) = 3/2 + sin(2πkX)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Toy1dProblem {
    pub length: f64,
    pub k: u32,
    pub t0: f64,
    pub body_force: f64,
}

impl Toy1dProblem {
    pub fn new(length: f64, k: u32, t0: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) || k == 0 || !t0.is_finite() {
            return Err(Error::invalid(format!(
                "toy bar needs L > 0 and k >= 1 (got L = {length}, k = {k})"
            )));
        }
        Ok(Toy1dProblem {
            length,
            k,
            t0,
            body_force: 0.0,
        })
    }

    pub fn with_body_force(mut self, f: f64) -> Self {
        self.body_force = f;
        self
    }
}

/// `μ(X) = 3/2 + sin(2πkX)`.
pub fn toy1d_modulus(k: u32, x: f64) -> f64 {
    1.5 + (2.0 * PI * k as f64 * x).sin()
}

/// `ψ = μ[2/3 (1+ε)^{3/2} − ε − 2/3]`.
pub fn toy1d_point_energy(mu: f64, eps: f64) -> f64 {
    mu * (2.0 / 3.0 * (1.0 + eps).powf(1.5) - eps - 2.0 / 3.0)
}

/// `σ = μ[(1+ε)^{1/2} − 1]`.
pub fn toy1d_point_stress(mu: f64, eps: f64) -> f64 {
    mu * ((1.0 + eps).sqrt() - 1.0)
}

fn point_tangent(mu: f64, eps: f64) -> f64 {
    0.5 * mu / (1.0 + eps).sqrt()
}

/// Nodes of the periodic trapezoid rule on one wavelength, which is
/// spectrally accurate for the smooth periodic integrands used here.
const QUAD: usize = 512;

fn period_moduli() -> impl Iterator<Item = f64> {
    (0..QUAD).map(|q| 1.5 + (2.0 * PI * q as f64 / QUAD as f64).sin())
}

fn mean_strain(sigma: f64) -> f64 {
    period_moduli()
        .map(|mu| (1.0 + sigma / mu).powi(2) - 1.0)
        .sum::<f64>()
        / QUAD as f64
}

fn mean_compliance(sigma: f64) -> f64 {
    period_moduli()
        .map(|mu| 2.0 * (1.0 + sigma / mu) / mu)
        .sum::<f64>()
        / QUAD as f64
}

/// Effective stress `σ̄(ε̄)`: the constant micro-stress whose strain average
/// over one period is `ε̄`.
pub fn toy1d_micro_stress(eps_bar: f64) -> Result<f64> {
    if !eps_bar.is_finite() || eps_bar <= -1.0 {
        return Err(Error::RootFindFailed(format!(
            "strain {eps_bar} outside (-1, inf)"
        )));
    }
    // ⟨ε⟩(σ) is increasing for σ > −min μ = −1/2.
    let mut lo = -0.5 * (1.0 - 1e-12);
    let mut hi = 1.0;
    while mean_strain(hi) < eps_bar {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::RootFindFailed(format!(
                "no bracket for strain {eps_bar}"
            )));
        }
    }
    if mean_strain(lo) > eps_bar {
        return Err(Error::RootFindFailed(format!(
            "strain {eps_bar} below attainable range"
        )));
    }
    let mut s = if eps_bar == 0.0 { 0.0 } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let g = mean_strain(s) - eps_bar;
        if g == 0.0 {
            return Ok(s);
        }
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let newton = s - g / mean_compliance(s);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= 1e-15 * (1.0 + s.abs()) {
            return Ok(next);
        }
        s = next;
    }
    Err(Error::RootFindFailed(format!(
        "stress root for strain {eps_bar} did not converge"
    )))
}

/// Effective energy `ψ̄(ε̄) = ⟨ψ(μ, ε)⟩` at the equilibrium micro-strain.
pub fn toy1d_micro_energy(eps_bar: f64) -> Result<f64> {
    let s = toy1d_micro_stress(eps_bar)?;
    Ok(period_moduli()
        .map(|mu| toy1d_point_energy(mu, (1.0 + s / mu).powi(2) - 1.0))
        .sum::<f64>()
        / QUAD as f64)
}

/// Effective tangent `dσ̄/dε̄ = 1 / ⟨dε/dσ⟩`.
pub fn toy1d_micro_tangent(eps_bar: f64) -> Result<f64> {
    Ok(1.0 / mean_compliance(toy1d_micro_stress(eps_bar)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarOptions {
    pub n_elements: usize,
    pub load_steps: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl BarOptions {
    pub fn new(n_elements: usize) -> Self {
        BarOptions {
            n_elements,
            load_steps: 1,
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarSolution {
    /// Nodal coordinates, `n_elements + 1` entries.
    pub x: Vec<f64>,
    /// Nodal displacements with `u[0] = 0`.
    pub u: Vec<f64>,
    pub iterations: usize,
}

impl BarSolution {
    pub fn tip(&self) -> f64 {
        *self.u.last().unwrap_or(&0.0)
    }
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Linear-element Newton solve of `d/dX σ(X, u') + f = 0` on `[0, L]` with
/// `u(0) = 0` and `σ(L) = t0`. `law(X, ε)` returns `(σ, dσ/dε)`.
pub fn solve_bar<M>(
    length: f64,
    t0: f64,
    body_force: f64,
    opts: &BarOptions,
    law: M,
) -> Result<BarSolution>
where
    M: Fn(f64, f64) -> Result<(f64, f64)>,
{
    let ne = opts.n_elements;
    if ne == 0 || opts.load_steps == 0 || !(length > 0.0) {
        return Err(Error::invalid(
            "bar needs at least one element and one load step",
        ));
    }
    let h = length / ne as f64;
    let x: Vec<f64> = (0..=ne).map(|i| i as f64 * h).collect();
    let mut u = vec![0.0; ne + 1];
    let mut total_iter = 0;

    // Tridiagonal system over free nodes 1..=ne.
    let n = ne;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for step in 1..=opts.load_steps {
        let lam = step as f64 / opts.load_steps as f64;
        let mut reference = None;
        let mut converged = false;
        let mut last = f64::NAN;
        for _ in 0..opts.max_iter {
            diag.iter_mut().for_each(|v| *v = 0.0);
            off.iter_mut().for_each(|v| *v = 0.0);
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for e in 0..ne {
                let eps = (u[e + 1] - u[e]) / h;
                if !(eps > -1.0) {
                    return Err(Error::NonPositiveJacobian {
                        det: 1.0 + eps,
                        location: format!("bar element {e}"),
                    });
                }
                let mut fint = 0.0;
                let mut kt = 0.0;
                for (g, w) in GAUSS3 {
                    let xg = x[e] + 0.5 * h * (1.0 + g);
                    let (s, ds) = law(xg, eps)?;
                    fint += 0.5 * w * s;
                    kt += 0.5 * w * ds / h;
                }
                let fext = 0.5 * h * lam * body_force;
                // Residual r = f_ext − f_int on free dofs (node i ↦ row i − 1).
                if e > 0 {
                    rhs[e - 1] += fint + fext;
                    diag[e - 1] += kt;
                    off[e - 1] -= kt;
                }
                rhs[e] += -fint + fext;
                diag[e] += kt;
            }
            rhs[n - 1] += lam * t0;
            let norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r0 = *reference.get_or_insert(norm.max(lam * t0.abs()).max(1e-300));
            last = norm;
            if norm <= opts.tol * r0 || norm <= 1e-14 * (ne as f64).sqrt() * r0 {
                converged = true;
                break;
            }
            let du = thomas(&diag, &off, &rhs)?;
            for (i, d) in du.iter().enumerate() {
                u[i + 1] += d;
            }
            total_iter += 1;
            // Update at round-off level: the residual cannot drop further.
            let dn = du.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let un = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if dn <= 1e-14 * un {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NewtonDiverged {
                iterations: opts.max_iter,
                residual: last,
                context: format!(" in bar solve at load factor {lam}"),
            });
        }
    }
    Ok(BarSolution {
        x,
        u,
        iterations: total_iter,
    })
}

/// Symmetric tridiagonal solve; `off[i]` couples rows `i` and `i + 1`.
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom.abs() < 1e-300 {
        return Err(Error::SingularTensor { det: denom });
    }
    c[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::SingularTensor { det: denom });
        }
        c[i] = if i + 1 < n { off[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Full-field solution of the heterogeneous bar on `n_elements ≥ 10k` elements.
pub fn toy1d_fullfield(p: &Toy1dProblem, n_elements: usize) -> Result<BarSolution> {
    if n_elements < 10 * p.k as usize {
        return Err(Error::invalid(format!(
            "{n_elements} elements cannot resolve wavenumber {} (need >= {})",
            p.k,
            10 * p.k
        )));
    }
    let k = p.k;
    solve_bar(
        p.length,
        p.t0,
        p.body_force,
        &BarOptions::new(n_elements),
        |x, eps| {
            let mu = toy1d_modulus(k, x);
            Ok((toy1d_point_stress(mu, eps), point_tangent(mu, eps)))
        },
    )
}

//! Oracle and property suites behind `homogen validate`.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{sample_box, SamplingBox};
use crate::error::{Error, Result};
use crate::fem::MacroSolution;
use crate::materials::{Material, NeoHookeanA};
use crate::micro::{FieldT2, MicroSolver, RveGrid, RveProblem, SolverOptions, Spectral};
use crate::oracles::{
    central_diff_tangent, laminate_energy_stress, solve_bar, toy1d_fullfield, toy1d_micro_energy,
    toy1d_micro_stress, toy1d_micro_tangent, BarOptions, LaminateProblem, Toy1dProblem,
};
use crate::surrogate::HdmrModel;
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Projection,
    Laminate,
    Toy1d,
    Derivatives,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Projection,
        Suite::Laminate,
        Suite::Toy1d,
        Suite::Derivatives,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Projection => "projection",
            Suite::Laminate => "laminate",
            Suite::Toy1d => "toy1d",
            Suite::Derivatives => "derivatives",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown suite {s:?} (projection|laminate|toy1d|derivatives)"
                ))
            })
    }
}

/// One measured quantity against its limit; passes when `value < limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
        }
    }

    pub fn passed(&self) -> bool {
        self.value < self.limit
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} (limit {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.limit
        )
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    /// Free-form table lines (per-sample comparisons).
    pub table: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "suite {} ({:.2} s)",
            self.suite.name(),
            self.elapsed.as_secs_f64()
        )?;
        for line in &self.table {
            writeln!(f, "  {line}")?;
        }
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        write!(
            f,
            "suite {}: {}",
            self.suite.name(),
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Odd micro-grid size for the projection and laminate suites.
    pub grid: usize,
    /// Random fields, deformations or models per suite.
    pub samples: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            seed: 2024,
            grid: 31,
            samples: 0,
        }
    }
}

impl ValidateOptions {
    fn samples_or(&self, default: usize) -> usize {
        if self.samples == 0 {
            default
        } else {
            self.samples
        }
    }
}

pub fn run_suite(suite: Suite, opts: &ValidateOptions) -> Result<SuiteReport> {
    let start = Instant::now();
    let (checks, table) = match suite {
        Suite::Projection => projection(opts)?,
        Suite::Laminate => laminate(opts)?,
        Suite::Toy1d => toy1d(opts)?,
        Suite::Derivatives => derivatives(opts)?,
    };
    Ok(SuiteReport {
        suite,
        checks,
        table,
        elapsed: start.elapsed(),
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn random_field(grid: &RveGrid, rng: &mut ChaCha8Rng) -> FieldT2 {
    let data = (0..grid.voxel_count())
        .map(|_| {
            Tensor2::from_rows([
                [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            ])
        })
        .collect();
    FieldT2::from_vec(grid, data).expect("matching length")
}

/// Relative Fourier curl `‖ξ₁ Ŵ_i2 − ξ₂ Ŵ_i1‖ / ‖|ξ| Ŵ‖` of a tensor field.
pub fn fourier_curl(spectral: &Spectral, w: &FieldT2) -> f64 {
    let hat = spectral.transform(w);
    let xi = crate::micro::wavenumbers(spectral.grid());
    let (mut num, mut den) = (0.0, 0.0);
    for (m, x) in xi.iter().enumerate() {
        let nrm2 = x[0] * x[0] + x[1] * x[1];
        for i in 0..2 {
            let c = hat[2 * i + 1][m] * x[0] - hat[2 * i][m] * x[1];
            num += c.norm_sqr();
            den += nrm2 * (hat[2 * i][m].norm_sqr() + hat[2 * i + 1][m].norm_sqr());
        }
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

type SuiteOut = (Vec<Check>, Vec<String>);

fn projection(opts: &ValidateOptions) -> Result<SuiteOut> {
    let grid = RveGrid::square(opts.grid)?;
    let spectral = Spectral::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut idem, mut mean, mut curl) = (0.0f64, 0.0f64, 0.0f64);
    let n = opts.samples_or(20);
    for _ in 0..n {
        let w = random_field(&grid, &mut rng);
        let gw = spectral.project(&w);
        let ggw = spectral.project(&gw);
        let diff = ggw
            .iter()
            .zip(gw.iter())
            .map(|(a, b)| (*a - *b).norm().powi(2))
            .sum::<f64>()
            .sqrt();
        idem = idem.max(diff / gw.norm());
        mean = mean.max(gw.mean().max_abs());
        curl = curl.max(fourier_curl(&spectral, &gw));
    }
    let g = opts.grid;
    Ok((
        vec![
            Check::new(
                format!("idempotency over {n} fields on {g}x{g}"),
                idem,
                1e-10,
            ),
            Check::new("zero mean", mean, 1e-12),
            Check::new("Fourier curl", curl, 1e-10),
        ],
        Vec::new(),
    ))
}

/// The two-phase laminate with `μ = 100 / 1000`, `β = 1`.
pub fn default_laminate(grid: usize) -> Result<RveProblem> {
    let soft: Material = NeoHookeanA::new(100.0, 1.0)?.into();
    let stiff: Material = NeoHookeanA::new(1000.0, 1.0)?.into();
    Ok(RveProblem::laminate(RveGrid::square(grid)?, soft, stiff))
}

/// Worst relative errors of the spectral solver against the laminate oracle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaminateComparison {
    pub energy: f64,
    pub stress: f64,
    pub tangent: f64,
    pub samples: usize,
}

/// Compares `ψ̄`, `P̄` and `ℂ̄` at `n` random `F̄` from the default laminate box.
/// Errors are relative to the largest oracle entry.
pub fn compare_laminate(
    rve: &RveProblem,
    n: usize,
    seed: u64,
    table: &mut Vec<String>,
) -> Result<LaminateComparison> {
    let oracle = LaminateProblem::matching(rve)?;
    let solver = MicroSolver::new(rve.clone(), SolverOptions::default())?;
    let points = sample_box(&SamplingBox::laminate_default(), n, seed)?;
    let mut out = LaminateComparison {
        samples: n,
        ..Default::default()
    };
    table.push(format!(
        "{:>9} {:>9} {:>9} {:>9} | {:>14} {:>14} {:>9} {:>9} {:>9}",
        "F11", "F12", "F21", "F22", "psi_fft", "psi_exact", "rel_psi", "rel_P", "rel_C"
    ));
    for x in points {
        let fbar = Tensor2::from_rows([[x[0], x[1]], [x[2], x[3]]]);
        let sol = solver.solve(&fbar)?;
        let c = solver.macro_tangent(&sol)?;
        let (psi, p) = laminate_energy_stress(&oracle, &fbar)?;
        let c_fd = central_diff_tangent(
            |f| laminate_energy_stress(&oracle, f).map(|r| r.1),
            &fbar,
            1e-6,
        )?;
        let e_psi = rel(sol.psi_bar, psi);
        let e_p = (sol.pbar - p).max_abs() / p.max_abs();
        let e_c = (c - c_fd).max_abs() / c_fd.max_abs();
        table.push(format!(
            "{:>9.5} {:>9.5} {:>9.5} {:>9.5} | {:>14.8e} {:>14.8e} {:>9.2e} {:>9.2e} {:>9.2e}",
            x[0], x[1], x[2], x[3], sol.psi_bar, psi, e_psi, e_p, e_c
        ));
        out.energy = out.energy.max(e_psi);
        out.stress = out.stress.max(e_p);
        out.tangent = out.tangent.max(e_c);
    }
    Ok(out)
}

fn laminate(opts: &ValidateOptions) -> Result<SuiteOut> {
    let rve = default_laminate(opts.grid)?;
    let mut table = Vec::new();
    let cmp = compare_laminate(&rve, opts.samples_or(20), opts.seed, &mut table)?;
    table.push(format!(
        "max relative errors: psi {:.3e}, P {:.3e}, C {:.3e}",
        cmp.energy, cmp.stress, cmp.tangent
    ));
    Ok((
        vec![
            Check::new("energy vs laminate oracle", cmp.energy, 1e-5),
            Check::new("stress vs laminate oracle", cmp.stress, 1e-4),
            Check::new("tangent vs central differences", cmp.tangent, 1e-3),
        ],
        table,
    ))
}

/// Per-element mean of `S̄[(i, j)]` over the quadrature points of a solution.
pub fn element_average_s(
    sol: &MacroSolution,
    element_count: usize,
    i: usize,
    j: usize,
) -> Vec<f64> {
    let mut sum = vec![0.0; element_count];
    let mut count = vec![0usize; element_count];
    for q in &sol.quadrature {
        sum[q.element] += q.s[(i, j)];
        count[q.element] += 1;
    }
    sum.iter()
        .zip(&count)
        .map(|(s, &c)| s / c.max(1) as f64)
        .collect()
}

/// Largest second difference `|v_i − (v_{i−1} + v_{i+1})/2|` along the interior
/// rows of an `nx × ny` structured grid of element values (row-major, bottom
/// row first), relative to the range of all values.
pub fn row_oscillation(values: &[f64], nx: usize, ny: usize) -> Result<f64> {
    if values.len() != nx * ny || nx < 3 || ny < 3 {
        return Err(Error::invalid(
            "row oscillation needs an nx × ny field with nx, ny ≥ 3",
        ));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for j in 1..ny - 1 {
        let row = &values[j * nx..(j + 1) * nx];
        for w in row.windows(3) {
            worst = worst.max((w[1] - 0.5 * (w[0] + w[2])).abs());
        }
    }
    Ok(worst / range)
}

/// Displacement-gap study for the heterogeneous bar against a homogenized law.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyStudy {
    pub wavenumbers: Vec<u32>,
    /// `max |u_full − u_hom|` over the homogenized nodes.
    pub gaps: Vec<f64>,
    pub fullfield_tips: Vec<f64>,
    pub homogenized_tip: f64,
}

impl ToyStudy {
    pub fn monotone(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1] < w[0])
    }

    /// Relative tip difference at the largest wavenumber.
    pub fn tip_error(&self) -> f64 {
        rel(
            self.homogenized_tip,
            *self.fullfield_tips.last().expect("non-empty"),
        )
    }
}

/// Bar setup for the toy study: `L = 1` and loads that take the root strain to
/// `ε̄ = 1`, half carried by the end traction and half by a constant body force.
pub fn toy_problem(k: u32) -> Result<Toy1dProblem> {
    let s = toy1d_micro_stress(1.0)?;
    Ok(Toy1dProblem::new(1.0, k, 0.5 * s)?.with_body_force(0.5 * s))
}

/// Solves the homogenized bar with `law(ε̄) = (σ̄, dσ̄/dε̄)` and compares it to
/// full-field solutions at each wavenumber.
pub fn toy_study<M>(wavenumbers: &[u32], hom_elements: usize, law: M) -> Result<ToyStudy>
where
    M: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    let p = toy_problem(1)?;
    let hom = solve_bar(
        p.length,
        p.t0,
        p.body_force,
        &BarOptions::new(hom_elements),
        |_, e| law(e),
    )?;
    let mut gaps = Vec::new();
    let mut tips = Vec::new();
    for &k in wavenumbers {
        let pk = toy_problem(k)?;
        // A multiple of the homogenized mesh with at least 200 elements per period.
        let per = (200 * k as usize).div_ceil(hom_elements).max(1);
        let ff = toy1d_fullfield(&pk, per * hom_elements)?;
        let gap = hom
            .u
            .iter()
            .enumerate()
            .map(|(i, u)| (ff.u[i * per] - u).abs())
            .fold(0.0, f64::max);
        gaps.push(gap);
        tips.push(ff.tip());
    }
    Ok(ToyStudy {
        wavenumbers: wavenumbers.to_vec(),
        gaps,
        fullfield_tips: tips,
        homogenized_tip: hom.tip(),
    })
}

fn toy1d(_opts: &ValidateOptions) -> Result<SuiteOut> {
    let mut checks = Vec::new();
    let mut table = Vec::new();
    let mut worst_s: f64 = 0.0;
    let mut worst_t: f64 = 0.0;
    for e in [0.1, 0.5, 1.0, 1.4] {
        let h = 1e-5;
        let fd = (toy1d_micro_energy(e + h)? - toy1d_micro_energy(e - h)?) / (2.0 * h);
        worst_s = worst_s.max(rel(fd, toy1d_micro_stress(e)?));
        let ft = (toy1d_micro_stress(e + h)? - toy1d_micro_stress(e - h)?) / (2.0 * h);
        worst_t = worst_t.max(rel(ft, toy1d_micro_tangent(e)?));
    }
    checks.push(Check::new(
        "effective stress = d(energy)/d(strain)",
        worst_s,
        1e-6,
    ));
    checks.push(Check::new(
        "effective tangent = d(stress)/d(strain)",
        worst_t,
        1e-6,
    ));
    let study = toy_study(&[10, 30, 100], 200, |e| {
        Ok((toy1d_micro_stress(e)?, toy1d_micro_tangent(e)?))
    })?;
    for ((k, g), t) in study
        .wavenumbers
        .iter()
        .zip(&study.gaps)
        .zip(&study.fullfield_tips)
    {
        table.push(format!(
            "k = {k:>3}: full-field tip {t:.8}, sup gap {g:.3e}"
        ));
    }
    table.push(format!("homogenized tip {:.8}", study.homogenized_tip));
    checks.push(Check::new(
        "gap decreases over k = 10, 30, 100 (0 = yes)",
        if study.monotone() { 0.0 } else { 1.0 },
        0.5,
    ));
    checks.push(Check::new(
        "tip vs k = 100 full field",
        study.tip_error(),
        1e-2,
    ));
    Ok((checks, table))
}

/// Worst errors from the surrogate derivative check.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerivativeCheck {
    /// Final relative errors at the smallest step.
    pub gradient_error: f64,
    pub hessian_error: f64,
    /// Error ratios under step halving (ideal 4), worst deviation over all models.
    pub gradient_ratio: (f64, f64),
    pub hessian_ratio: (f64, f64),
}

fn fd_errors(m: &HdmrModel, x: &[f64], h: f64) -> (f64, f64) {
    let dim = x.len();
    let (_, g, hess) = m.derivatives(x, true);
    let f = |y: &[f64]| m.evaluate(y);
    let f0 = f(x);
    let mut eg = 0.0;
    let mut eh = 0.0;
    let mut y = x.to_vec();
    for r in 0..dim {
        y[r] = x[r] + h;
        let fp = f(&y);
        y[r] = x[r] - h;
        let fm = f(&y);
        y[r] = x[r];
        eg += ((fp - fm) / (2.0 * h) - g[r]).powi(2);
        for s in 0..dim {
            let fd = if r == s {
                (fp - 2.0 * f0 + fm) / (h * h)
            } else {
                let mut q = |a: f64, b: f64| {
                    y[r] = x[r] + a;
                    y[s] = x[s] + b;
                    let v = f(&y);
                    y[r] = x[r];
                    y[s] = x[s];
                    v
                };
                (q(h, h) - q(h, -h) - q(-h, h) + q(-h, -h)) / (4.0 * h * h)
            };
            eh += (fd - hess[r * dim + s]).powi(2);
        }
    }
    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let hn = hess.iter().map(|v| v * v).sum::<f64>().sqrt();
    (eg.sqrt() / gn, eh.sqrt() / hn)
}

/// Finite-difference check of the analytical gradient and Hessian over `n`
/// random models. Steps are fractions of each input's box width.
pub fn check_derivatives(n: usize, seed: u64) -> Result<DerivativeCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DerivativeCheck {
        gradient_ratio: (f64::INFINITY, 0.0),
        hessian_ratio: (f64::INFINITY, 0.0),
        ..Default::default()
    };
    for i in 0..n {
        let l = rng.random_range(1..=6);
        let d = rng.random_range(1..=4);
        let hidden = rng.random_range(1..=12);
        let m = HdmrModel::random(4, d, l, hidden, rng.random())?;
        let norm = m.normalization();
        let x: Vec<f64> = (0..4)
            .map(|r| norm.x_min[r] + rng.random_range(0.1..0.9) * (norm.x_max[r] - norm.x_min[r]))
            .collect();
        // Rescale to unit box width so one step size fits all inputs.
        let width = (0..4)
            .map(|r| norm.delta_x(r))
            .fold(f64::INFINITY, f64::min);
        let (g1, h1) = fd_errors(&m, &x, 0.04 * width);
        let (g2, h2) = fd_errors(&m, &x, 0.02 * width);
        let (gf, _) = fd_errors(&m, &x, 1e-5 * width);
        let (_, hf) = fd_errors(&m, &x, 1e-4 * width);
        let rg = g1 / g2;
        let rh = h1 / h2;
        out.gradient_ratio = (out.gradient_ratio.0.min(rg), out.gradient_ratio.1.max(rg));
        out.hessian_ratio = (out.hessian_ratio.0.min(rh), out.hessian_ratio.1.max(rh));
        out.gradient_error = out.gradient_error.max(gf);
        out.hessian_error = out.hessian_error.max(hf);
        log::debug!("model {i}: ratios {rg:.3}/{rh:.3}, errors {gf:.2e}/{hf:.2e}");
    }
    Ok(out)
}

fn derivatives(opts: &ValidateOptions) -> Result<SuiteOut> {
    let n = opts.samples_or(100);
    let c = check_derivatives(n, opts.seed)?;
    let dev = |r: (f64, f64)| (r.0 - 4.0).abs().max((r.1 - 4.0).abs());
    Ok((
        vec![
            Check::new(
                format!("gradient step-halving ratio |r - 4| over {n} models"),
                dev(c.gradient_ratio),
                0.5,
            ),
            Check::new(
                "Hessian step-halving ratio |r - 4|",
                dev(c.hessian_ratio),
                0.5,
            ),
            Check::new("gradient relative error", c.gradient_error, 1e-6),
            Check::new("Hessian relative error", c.hessian_error, 1e-5),
        ],
        vec![format!(
            "ratios: gradient {:.3}..{:.3}, Hessian {:.3}..{:.3}",
            c.gradient_ratio.0, c.gradient_ratio.1, c.hessian_ratio.0, c.hessian_ratio.1
        )],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_parse_by_name() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("curl".parse::<Suite>().is_err());
    }

    #[test]
    fn projection_suite_passes_on_small_grid() {
        let r = run_suite(
            Suite::Projection,
            &ValidateOptions {
                grid: 9,
                samples: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn curl_detects_incompatible_fields() {
        let g = RveGrid::square(9).unwrap();
        let s = Spectral::new(&g);
        let w = random_field(&g, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(fourier_curl(&s, &w) > 0.1);
    }

    #[test]
    fn derivative_check_on_a_few_models() {
        let c = check_derivatives(5, 9).unwrap();
        assert!(c.gradient_error < 1e-6 && c.hessian_error < 1e-5, "{c:?}");
    }

    #[test]
    fn row_oscillation_of_linear_rows_is_zero() {
        let (nx, ny) = (6, 4);
        let v: Vec<f64> = (0..nx * ny)
            .map(|e| (e % nx) as f64 * 2.0 + (e / nx) as f64)
            .collect();
        assert!(row_oscillation(&v, nx, ny).unwrap() < 1e-14);
    }

    #[test]
    fn row_oscillation_sees_a_checkerboard() {
        let (nx, ny) = (6, 4);
        let v: Vec<f64> = (0..nx * ny)
            .map(|e| ((e % nx + e / nx) % 2) as f64)
            .collect();
        assert!((row_oscillation(&v, nx, ny).unwrap() - 1.0).abs() < 1e-14);
        assert!(row_oscillation(&v, 5, 4).is_err());
    }
}

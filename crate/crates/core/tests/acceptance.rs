//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use homogen::config::stage_seed;
use homogen::dataset::{build_dataset, build_dataset_with, split, SamplingBox};
use homogen::fem::{
    cantilever, cantilever_fullfield, cook_membrane, mapped_grid, solve_macro, Assembler,
    BoundaryConditions, Dirichlet, MacroOptions, NestedProvider, Provider,
};
use homogen::materials::{Material, NeoHookeanB};
use homogen::micro::{MicroSolver, RveGrid, RveProblem, SolverOptions};
use homogen::oracles::toy1d_micro_energy;
use homogen::surrogate::{train_with_validation, Architecture, TrainOptions};
use homogen::tensor::Tensor2;
use homogen::validate::{
    check_derivatives, compare_laminate, default_laminate, element_average_s, row_oscillation,
    run_suite, toy_study, Suite, ValidateOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> homogen::Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn matrix() -> Material {
    NeoHookeanB::new(100.0, 0.4).expect("valid").into()
}

fn inclusion() -> Material {
    NeoHookeanB::new(1000.0, 0.3).expect("valid").into()
}

fn projection() -> homogen::Result<Outcome> {
    let r = run_suite(
        Suite::Projection,
        &ValidateOptions {
            grid: 31,
            samples: 20,
            seed: 2024,
        },
    )?;
    let values: Vec<String> = r
        .checks
        .iter()
        .map(|c| format!("{} {:.1e}", c.name, c.value))
        .collect();
    outcome(r.passed(), values.join(", "))
}

fn laminate() -> homogen::Result<Outcome> {
    let mut table = Vec::new();
    let c = compare_laminate(&default_laminate(31)?, 50, 2024, &mut table)?;
    outcome(
        c.energy < 1e-5 && c.stress < 1e-4 && c.tangent < 1e-3,
        format!(
            "{} F̄: energy {:.1e} (< 1e-5), stress {:.1e} (< 1e-4), tangent {:.1e} (< 1e-3)",
            c.samples, c.energy, c.stress, c.tangent
        ),
    )
}

fn homogeneous() -> homogen::Result<Outcome> {
    let m = matrix();
    let solver = MicroSolver::new(
        RveProblem::homogeneous(RveGrid::square(31)?, m),
        SolverOptions::default(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut fluct): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let f = Tensor2::from_rows([
            [rng.random_range(0.8..1.2), rng.random_range(-0.3..0.3)],
            [rng.random_range(-0.3..0.3), rng.random_range(0.8..1.2)],
        ]);
        let sol = solver.solve(&f)?;
        let c = solver.macro_tangent(&sol)?;
        let r = m.response(&f)?;
        worst = worst
            .max(rel(sol.psi_bar, r.energy))
            .max((sol.pbar - r.stress).norm() / r.stress.norm())
            .max((c - r.tangent).max_abs() / r.tangent.max_abs());
        fluct = fluct.max(sol.fluctuation_norm());
    }
    outcome(
        worst < 1e-8 && fluct < 1e-10,
        format!("10 F̄: worst relative error {worst:.1e} (< 1e-8), fluctuation norm {fluct:.1e} (< 1e-10)"),
    )
}

fn derivatives() -> homogen::Result<Outcome> {
    let c = check_derivatives(100, 2024)?;
    let ratio_ok = |r: (f64, f64)| (3.5..=4.5).contains(&r.0) && (3.5..=4.5).contains(&r.1);
    outcome(
        ratio_ok(c.gradient_ratio) && ratio_ok(c.hessian_ratio) && c.gradient_error < 1e-6 && c.hessian_error < 1e-5,
        format!(
            "100 models: ratios {:.2}..{:.2} / {:.2}..{:.2} (4 ± 0.5), gradient {:.1e} (< 1e-6), Hessian {:.1e} (< 1e-5)",
            c.gradient_ratio.0,
            c.gradient_ratio.1,
            c.hessian_ratio.0,
            c.hessian_ratio.1,
            c.gradient_error,
            c.hessian_error
        ),
    )
}

fn toy() -> homogen::Result<Outcome> {
    let b = SamplingBox::new(vec![-0.5], vec![1.5])?;
    let build = build_dataset_with(&b, 10_000, 11, "toy1d", None, |x| toy1d_micro_energy(x[0]))?;
    let (tr, val) = split(&build.dataset, 0.1, 12)?;
    let opts = TrainOptions {
        seed: 13,
        ..TrainOptions::default()
    };
    let (model, _) = train_with_validation(&tr, Some(&val), Architecture::new(2, 1, 5)?, &opts)?;
    let study = toy_study(&[10, 30, 100], 200, |e| {
        let (_, g, h) = model.derivatives(&[e], true);
        Ok((g[0], h[0]))
    })?;
    outcome(
        study.tip_error() < 1e-2 && study.monotone(),
        format!(
            "{} training points: tip error {:.2e} (< 1e-2), gaps {:.2e} > {:.2e} > {:.2e}",
            tr.len(),
            study.tip_error(),
            study.gaps[0],
            study.gaps[1],
            study.gaps[2]
        ),
    )
}

fn laminate_surrogate() -> homogen::Result<Outcome> {
    let seed = 20240501;
    let rve = default_laminate(31)?;
    let build = build_dataset(
        &rve,
        &SamplingBox::laminate_default(),
        2500,
        seed,
        &SolverOptions::default(),
    )?;
    let (tr, val) = split(&build.dataset, 0.8, stage_seed(seed, "split"))?;
    let opts = TrainOptions {
        seed: stage_seed(seed, "train"),
        ..TrainOptions::default()
    };
    let (model, report) =
        train_with_validation(&tr, Some(&val), Architecture::new(5, 4, 10)?, &opts)?;
    let solver = MicroSolver::new(rve, SolverOptions::default())?;
    let mut worst: f64 = 0.0;
    for r in val.records.iter().take(20) {
        let f = r.fbar()?;
        let exact = solver.solve(&f)?.pbar;
        let g = model.gradient(&r.x);
        let p = Tensor2::from_rows([[g[0], g[1]], [g[2], g[3]]]);
        worst = worst.max((p - exact).norm() / exact.norm());
    }
    outcome(
        report.validation_rmse < 1e-2 && worst < 0.05,
        format!(
            "{} training points: validation RMSE {:.2e} (< 1e-2), held-out stress {:.2e} (< 5e-2)",
            report.n_train, report.validation_rmse, worst
        ),
    )
}

fn cook() -> homogen::Result<Outcome> {
    let seed = 7;
    let rve = RveProblem::circular_inclusion(RveGrid::square(21)?, matrix(), inclusion(), 0.2)?;
    let build = build_dataset(
        &rve,
        &SamplingBox::inclusion_default(),
        2500,
        stage_seed(seed, "sample"),
        &SolverOptions::default(),
    )?;
    let opts = TrainOptions {
        seed: stage_seed(seed, "train"),
        ..TrainOptions::default()
    };
    let (tr, val) = split(&build.dataset, 0.8, stage_seed(seed, "split"))?;
    let (model, _) = train_with_validation(&tr, Some(&val), Architecture::new(5, 4, 10)?, &opts)?;
    let p = cook_membrane(8, 8, 4.0)?;
    let a = solve_macro(
        &p.mesh,
        &p.bc,
        &Provider::Surrogate(model),
        &MacroOptions::default(),
    )?;
    let nested = Provider::Nested(NestedProvider::new(rve, SolverOptions::default(), true)?);
    let b = solve_macro(&p.mesh, &p.bc, &nested, &MacroOptions::default())?;
    let d = rel(a.u[p.tip][1], b.u[p.tip][1]);
    outcome(
        d < 0.02,
        format!(
            "8x8 mesh: tip u2 surrogate {:.5}, nested {:.5}, difference {:.2e} (< 2e-2)",
            a.u[p.tip][1], b.u[p.tip][1], d
        ),
    )
}

fn cantilever_beam() -> homogen::Result<Outcome> {
    let (seed, fraction, q0, per_cell) = (11, 0.2, -0.25, 15);
    let full = cantilever_fullfield(20, 5, per_cell, (fraction / PI).sqrt(), q0)?;
    let a = solve_macro(
        &full.mesh,
        &full.bc,
        &Provider::Direct(vec![matrix(), inclusion()]),
        &MacroOptions::default(),
    )?;

    let rve = RveProblem::circular_inclusion(
        RveGrid::square(per_cell)?,
        matrix(),
        inclusion(),
        fraction,
    )?;
    let build = build_dataset(
        &rve,
        &SamplingBox::deformation(0.9, 1.1, 0.2)?,
        5000,
        stage_seed(seed, "sample"),
        &SolverOptions::default(),
    )?;
    let (tr, val) = split(&build.dataset, 0.8, stage_seed(seed, "split"))?;
    let opts = TrainOptions {
        seed: stage_seed(seed, "train"),
        ..TrainOptions::default()
    };
    let (model, _) = train_with_validation(&tr, Some(&val), Architecture::new(5, 4, 15)?, &opts)?;
    let (nx, ny) = (40, 10);
    let hom = cantilever(20.0, 5.0, nx, ny, q0)?;
    let b = solve_macro(
        &hom.mesh,
        &hom.bc,
        &Provider::Surrogate(model),
        &MacroOptions::default(),
    )?;

    let d = rel(b.u[hom.tip][1], a.u[full.tip][1]);
    let osc = row_oscillation(
        &element_average_s(&b, hom.mesh.element_count(), 0, 0),
        nx,
        ny,
    )?;
    outcome(
        d < 0.03 && osc < 0.1 && b.warnings.is_empty(),
        format!(
            "tip u2 full field {:.5}, homogenized {:.5}, difference {:.2e} (< 3e-2); S11 row oscillation {:.1}% of range (< 10%); {} extrapolation warnings",
            a.u[full.tip][1],
            b.u[hom.tip][1],
            d,
            100.0 * osc,
            b.warnings.len()
        ),
    )
}

fn fem_integrity() -> homogen::Result<Outcome> {
    let m = matrix();
    let provider = Provider::Direct(vec![m]);

    // Patch test on a distorted mesh with the whole boundary prescribed.
    let fbar = Tensor2::from_rows([[1.1, 0.15], [-0.05, 0.92]]);
    let mut mesh = mapped_grid([[0.0, 0.0], [4.0, 0.0], [4.0, 3.0], [0.0, 3.0]], 4, 3)?;
    let mut nodes = mesh.nodes().to_vec();
    nodes[6] = [1.3, 0.8];
    nodes[12] = [2.7, 2.2];
    mesh = homogen::fem::MacroMesh::new(nodes, mesh.elements().to_vec(), None)?;
    let mut bc = BoundaryConditions::default();
    for (n, x) in mesh.nodes().iter().enumerate() {
        if x[0] == 0.0 || x[0] == 4.0 || x[1] == 0.0 || x[1] == 3.0 {
            for c in 0..2 {
                let value = (fbar[(c, 0)] - f64::from(u8::from(c == 0))) * x[0]
                    + (fbar[(c, 1)] - f64::from(u8::from(c == 1))) * x[1];
                bc.dirichlet.push(Dirichlet {
                    node: n,
                    comp: c,
                    value,
                });
            }
        }
    }
    let sol = solve_macro(&mesh, &bc, &provider, &MacroOptions::default())?;
    let patch = sol
        .quadrature
        .iter()
        .map(|q| (q.f - fbar).max_abs())
        .fold(0.0, f64::max);

    // Assembled tangent against central differences of the residual.
    let p = cook_membrane(2, 2, 4.0)?;
    let asm = Assembler::new(&p.mesh, &p.bc)?;
    let u: Vec<[f64; 2]> = p
        .mesh
        .nodes()
        .iter()
        .map(|x| [0.002 * x[0] * x[1] / 10.0, 0.05 * x[0] - 0.001 * x[1]])
        .collect();
    let k = asm
        .assemble(&provider, &u, 1.0, true)?
        .tangent
        .expect("tangent requested");
    let h = 1e-7;
    let (mut worst, mut scale): (f64, f64) = (0.0, 0.0);
    for n in 0..p.mesh.node_count() {
        for c in 0..2 {
            let Some(j) = asm.equation(n, c) else {
                continue;
            };
            let mut up = u.clone();
            up[n][c] += h;
            let rp = asm.free_vector(&asm.assemble(&provider, &up, 1.0, false)?.nodal_residual);
            up[n][c] -= 2.0 * h;
            let rm = asm.free_vector(&asm.assemble(&provider, &up, 1.0, false)?.nodal_residual);
            for i in 0..asm.free_dofs() {
                worst = worst.max(((rp[i] - rm[i]) / (2.0 * h) - k.get(i, j)).abs());
                scale = scale.max(k.get(i, j).abs());
            }
        }
    }
    let tangent = worst / scale;

    let cook = cook_membrane(8, 8, 4.0)?;
    let balance =
        solve_macro(&cook.mesh, &cook.bc, &provider, &MacroOptions::default())?.balance_error();
    outcome(
        patch < 1e-10 && tangent < 1e-4 && balance < 1e-8,
        format!("patch {patch:.1e} (< 1e-10), tangent {tangent:.1e} (< 1e-4), balance {balance:.1e} (< 1e-8)"),
    )
}

type Criterion = (
    u32,
    &'static str,
    Duration,
    fn() -> homogen::Result<Outcome>,
);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "projection operator", Duration::from_secs(5), projection),
        (
            2,
            "laminate equivalence",
            Duration::from_secs(120),
            laminate,
        ),
        (3, "homogeneous RVE", Duration::from_secs(60), homogeneous),
        (
            4,
            "surrogate derivatives",
            Duration::from_secs(10),
            derivatives,
        ),
        (5, "1D toy problem", Duration::from_secs(60), toy),
        (
            6,
            "laminate surrogate",
            Duration::from_secs(600),
            laminate_surrogate,
        ),
        (
            7,
            "Cook's membrane providers",
            Duration::from_secs(900),
            cook,
        ),
        (
            8,
            "cantilever full field vs homogenized",
            Duration::from_secs(1200),
            cantilever_beam,
        ),
        (9, "FEM integrity", Duration::from_secs(60), fem_integrity),
    ];
    let mut failures = 0;
    for (n, name, limit, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let (passed, detail) = match result {
            Ok(o) => (o.passed && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "{} criterion {n} ({name}): {detail}; {:.1} s (limit {} s)",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("{} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

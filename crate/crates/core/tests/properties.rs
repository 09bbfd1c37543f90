use homogen::dataset::{build_dataset, write_dataset, SamplingBox};
use homogen::fem::{cantilever, solve_macro, MacroOptions, Provider};
use homogen::materials::{Material, NeoHookeanA, NeoHookeanB};
use homogen::micro::{FieldT2, MicroSolver, SolverOptions, Spectral};
use homogen::oracles::{laminate_energy_stress, LaminateProblem};
use homogen::surrogate::{train, Architecture, HdmrModel, TrainOptions};
use homogen::tensor::{ddot42, Tensor2, Tensor4};
use homogen::validate::default_laminate;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn entry() -> impl Strategy<Value = f64> {
    -1.0f64..1.0
}

fn tensor2() -> impl Strategy<Value = Tensor2> {
    (entry(), entry(), entry(), entry())
        .prop_map(|(a, b, c, d)| Tensor2::from_rows([[a, b], [c, d]]))
}

fn tensor4() -> impl Strategy<Value = Tensor4> {
    proptest::collection::vec(entry(), 16).prop_map(|v| {
        let mut t = Tensor4::ZERO;
        for (n, x) in v.into_iter().enumerate() {
            let (r, c) = (n / 4, n % 4);
            t[(r / 2, r % 2, c / 2, c % 2)] = x;
        }
        t
    })
}

/// Deformation gradients with determinant in [0.5, 2].
fn deformation() -> impl Strategy<Value = Tensor2> {
    (
        0.5f64..2.0,
        -0.5f64..0.5,
        -0.5f64..0.5,
        0.0f64..std::f64::consts::TAU,
    )
        .prop_filter_map("determinant range", |(s, a, b, th)| {
            let (c, s_) = (th.cos(), th.sin());
            let u = Tensor2::from_rows([[s.sqrt() + a, b], [b, s.sqrt() - a]]);
            let r = Tensor2::from_rows([[c, -s_], [s_, c]]);
            let f = r.dot(&u);
            (0.5..=2.0).contains(&f.det()).then_some(f)
        })
}

fn materials() -> [Material; 2] {
    [
        NeoHookeanA::new(100.0, 1.0).unwrap().into(),
        NeoHookeanB::new(100.0, 0.4).unwrap().into(),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ddot42_is_bilinear(c1 in tensor4(), c2 in tensor4(), t1 in tensor2(), t2 in tensor2(), a in entry(), b in entry()) {
        let lhs = ddot42(&(c1 * a + c2 * b), &(t1 + t2));
        let rhs = ddot42(&c1, &t1) * a + ddot42(&c1, &t2) * a + ddot42(&c2, &t1) * b + ddot42(&c2, &t2) * b;
        prop_assert!((lhs - rhs).max_abs() < 1e-13 * 16.0);
    }

    #[test]
    fn stress_and_tangent_are_derivatives(f in deformation()) {
        let h = 1e-6;
        for m in materials() {
            let p = m.stress(&f).unwrap();
            let c = m.tangent(&f).unwrap();
            let mut fd_p = Tensor2::ZERO;
            let mut fd_c = Tensor4::ZERO;
            for k in 0..2 {
                for l in 0..2 {
                    let e = Tensor2::unit(k, l) * h;
                    fd_p[(k, l)] = (m.energy(&(f + e)).unwrap() - m.energy(&(f - e)).unwrap()) / (2.0 * h);
                    let col = (m.stress(&(f + e)).unwrap() - m.stress(&(f - e)).unwrap()) * (0.5 / h);
                    fd_c.set_column(k, l, &col);
                }
            }
            prop_assert!((fd_p - p).norm() < 1e-5 * p.norm().max(1.0));
            prop_assert!((fd_c - c).max_abs() < 1e-4 * c.max_abs());
            prop_assert!(c.major_asymmetry() < 1e-10 * c.max_abs());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn converged_stress_is_orthogonal_to_compatible_variations(
        d1 in 0.8f64..1.2, d2 in 0.8f64..1.2, o1 in -0.25f64..0.25, o2 in -0.25f64..0.25, seed in 0u64..1000
    ) {
        let rve = default_laminate(15).unwrap();
        let grid = *rve.grid();
        let solver = MicroSolver::new(rve, SolverOptions::default()).unwrap();
        let sol = solver.solve(&Tensor2::from_rows([[d1, o1], [o2, d2]])).unwrap();
        let p = solver.stress_field(&sol.f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = FieldT2::from_vec(
            &grid,
            (0..grid.voxel_count())
                .map(|_| Tensor2::from_rows([[rng.random(), rng.random()], [rng.random(), rng.random()]]))
                .collect(),
        )
        .unwrap();
        let df = Spectral::new(&grid).project(&w);
        prop_assert!(p.dot(&df).abs() < 1e-8 * p.norm() * df.norm());
    }

    #[test]
    fn spectral_laminate_matches_oracle(d1 in 0.7f64..1.3, d2 in 0.7f64..1.3, o1 in -0.3f64..0.3, o2 in -0.3f64..0.3) {
        let f = Tensor2::from_rows([[d1, o1], [o2, d2]]);
        prop_assume!(f.det() > 0.2);
        let rve = default_laminate(31).unwrap();
        let oracle = LaminateProblem::matching(&rve).unwrap();
        let sol = MicroSolver::new(rve, SolverOptions::default()).unwrap().solve(&f).unwrap();
        let (psi, p) = laminate_energy_stress(&oracle, &f).unwrap();
        prop_assert!(rel(sol.psi_bar, psi) < 1e-5);
        prop_assert!((sol.pbar - p).norm() < 1e-4 * p.norm());
    }

    #[test]
    fn average_stress_is_energy_gradient(d1 in 0.8f64..1.2, d2 in 0.8f64..1.2, o1 in -0.2f64..0.2, o2 in -0.2f64..0.2) {
        let f = Tensor2::from_rows([[d1, o1], [o2, d2]]);
        let solver = MicroSolver::new(default_laminate(15).unwrap(), SolverOptions::default()).unwrap();
        let sol = solver.solve(&f).unwrap();
        let h = 1e-5;
        let mut fd = Tensor2::ZERO;
        for k in 0..2 {
            for l in 0..2 {
                let e = Tensor2::unit(k, l) * h;
                let up = solver.solve_from(&(f + e), Some(&sol.f)).unwrap().psi_bar;
                let dn = solver.solve_from(&(f - e), Some(&sol.f)).unwrap().psi_bar;
                fd[(k, l)] = (up - dn) / (2.0 * h);
            }
        }
        prop_assert!((fd - sol.pbar).norm() < 1e-4 * sol.pbar.norm().max(1.0));
    }

    #[test]
    fn saved_model_evaluates_identically(seed in 0u64..10_000, x in proptest::collection::vec(0.7f64..1.3, 4)) {
        let m = HdmrModel::random(4, 3, 3, 5, seed).unwrap();
        let back = HdmrModel::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(m.evaluate(&x).to_bits(), back.evaluate(&x).to_bits());
        let (_, g1, h1) = m.derivatives(&x, true);
        let (_, g2, h2) = back.derivatives(&x, true);
        prop_assert_eq!(g1, g2);
        prop_assert_eq!(h1, h2);
    }

    #[test]
    fn reactions_balance_any_end_load(q in -0.6f64..0.6) {
        prop_assume!(q.abs() > 1e-3);
        let p = cantilever(4.0, 1.0, 8, 2, q).unwrap();
        let provider = Provider::Direct(vec![NeoHookeanB::new(100.0, 0.3).unwrap().into()]);
        let sol = solve_macro(&p.mesh, &p.bc, &provider, &MacroOptions::default()).unwrap();
        prop_assert!(sol.balance_error() < 1e-8);
    }
}

#[test]
fn dataset_files_are_byte_identical_across_thread_counts() {
    let rve = default_laminate(9).unwrap();
    let b = SamplingBox::laminate_default();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let build = pool
            .install(|| build_dataset(&rve, &b, 40, 5, &SolverOptions::default()))
            .unwrap();
        let path = dir.path().join(format!("d{threads}.csv"));
        write_dataset(&path, &build.dataset).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn training_twice_gives_the_same_model() {
    let rve = default_laminate(9).unwrap();
    let build = build_dataset(
        &rve,
        &SamplingBox::laminate_default(),
        120,
        3,
        &SolverOptions::default(),
    )
    .unwrap();
    let opts = TrainOptions {
        seed: 4,
        component_iters: 20,
        fine_tune_iters: 20,
        ..TrainOptions::default()
    };
    let arch = Architecture::new(2, 4, 4).unwrap();
    let (a, _) = train(&build.dataset, arch, &opts).unwrap();
    let (b, _) = train(&build.dataset, arch, &opts).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

//! Cook's membrane on the circular-inclusion microstructure, solved twice: with
//! a trained HDMR surrogate and with nested FE-FFT micro-solves.
//!
//! ```text
//! cargo run --release --example cook_membrane -- [samples] [mesh]
//! ```

use std::time::Instant;

use homogen::config::stage_seed;
use homogen::dataset::{build_dataset, SamplingBox};
use homogen::fem::{cook_membrane, solve_macro, MacroOptions, NestedProvider, Provider};
use homogen::materials::NeoHookeanB;
use homogen::micro::{RveGrid, RveProblem, SolverOptions};
use homogen::surrogate::{train, Architecture, TrainOptions};

fn main() -> homogen::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let samples = args.first().copied().unwrap_or(2500);
    let mesh_n = args.get(1).copied().unwrap_or(8);
    let seed = 7;

    let rve = RveProblem::circular_inclusion(
        RveGrid::square(21)?,
        NeoHookeanB::new(100.0, 0.4)?.into(),
        NeoHookeanB::new(1000.0, 0.3)?.into(),
        0.2,
    )?;
    let t = Instant::now();
    let build = build_dataset(
        &rve,
        &SamplingBox::inclusion_default(),
        samples,
        stage_seed(seed, "sample"),
        &SolverOptions::default(),
    )?;
    println!(
        "dataset: {} records, {} rejected ({:.1} s)",
        build.dataset.len(),
        build.rejects.len(),
        t.elapsed().as_secs_f64()
    );

    let t = Instant::now();
    let opts = TrainOptions {
        seed: stage_seed(seed, "train"),
        ..TrainOptions::default()
    };
    let (model, report) = train(&build.dataset, Architecture::new(5, 4, 10)?, &opts)?;
    println!(
        "surrogate: train RMSE {:.2e}, validation RMSE {:.2e} ({:.1} s)",
        report.train_rmse,
        report.validation_rmse,
        t.elapsed().as_secs_f64()
    );

    let problem = cook_membrane(mesh_n, mesh_n, 4.0)?;
    let macro_opts = MacroOptions::default();

    let t = Instant::now();
    let surrogate = Provider::Surrogate(model);
    let a = solve_macro(&problem.mesh, &problem.bc, &surrogate, &macro_opts)?;
    println!(
        "surrogate: tip u = ({:.6}, {:.6}), {} extrapolation warnings ({:.2} s)",
        a.u[problem.tip][0],
        a.u[problem.tip][1],
        a.warnings.len(),
        t.elapsed().as_secs_f64()
    );

    let t = Instant::now();
    let nested = Provider::Nested(NestedProvider::new(rve, SolverOptions::default(), true)?);
    let b = solve_macro(&problem.mesh, &problem.bc, &nested, &macro_opts)?;
    println!(
        "nested:    tip u = ({:.6}, {:.6}), {} micro-solves ({:.1} s)",
        b.u[problem.tip][0],
        b.u[problem.tip][1],
        b.micro_solves,
        t.elapsed().as_secs_f64()
    );
    let rel = (a.u[problem.tip][1] - b.u[problem.tip][1]).abs() / b.u[problem.tip][1].abs();
    println!("relative tip difference {rel:.3e}");
    Ok(())
}

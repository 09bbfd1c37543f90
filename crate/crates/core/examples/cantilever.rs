//! Full-field cantilever with resolved inclusions against the homogenized
//! cantilever driven by a surrogate trained on the matching RVE.
//!
//! ```text
//! cargo run --release --example cantilever -- [samples] [cells_x] [cells_y] [per_cell] [hom_per_cell]
//! ```

use std::time::Instant;

use homogen::config::stage_seed;
use homogen::dataset::{build_dataset, SamplingBox};
use homogen::fem::{
    cantilever, cantilever_fullfield, solve_macro, MacroOptions, NestedProvider, Provider,
};
use homogen::materials::{Material, NeoHookeanB};
use homogen::micro::{RveGrid, RveProblem, SolverOptions};
use homogen::surrogate::{train, Architecture, TrainOptions};
use homogen::validate::{element_average_s, row_oscillation};

fn main() -> homogen::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let samples = args.first().copied().unwrap_or(5000);
    let cells_x = args.get(1).copied().unwrap_or(20);
    let cells_y = args.get(2).copied().unwrap_or(5);
    let per_cell = args.get(3).copied().unwrap_or(15);
    let (seed, fraction, q0) = (11, 0.2, -0.25);

    let matrix: Material = NeoHookeanB::new(100.0, 0.4)?.into();
    let inclusion: Material = NeoHookeanB::new(1000.0, 0.3)?.into();

    let t = Instant::now();
    let full = cantilever_fullfield(
        cells_x,
        cells_y,
        per_cell,
        (fraction / std::f64::consts::PI).sqrt(),
        q0,
    )?;
    let direct = Provider::Direct(vec![matrix, inclusion]);
    let a = solve_macro(&full.mesh, &full.bc, &direct, &MacroOptions::default())?;
    let tip_full = a.u[full.tip];
    println!(
        "full field: {} elements, tip u = ({:.6}, {:.6}) ({:.1} s)",
        full.mesh.element_count(),
        tip_full[0],
        tip_full[1],
        t.elapsed().as_secs_f64()
    );

    let t = Instant::now();
    let rve =
        RveProblem::circular_inclusion(RveGrid::square(per_cell)?, matrix, inclusion, fraction)?;
    let rve_copy = rve.clone();
    let build = build_dataset(
        &rve,
        &SamplingBox::deformation(0.9, 1.1, 0.2)?,
        samples,
        stage_seed(seed, "sample"),
        &SolverOptions::default(),
    )?;
    let opts = TrainOptions {
        seed: stage_seed(seed, "train"),
        ..TrainOptions::default()
    };
    let (model, report) = train(&build.dataset, Architecture::new(5, 4, 15)?, &opts)?;
    println!(
        "surrogate: {} records, validation RMSE {:.2e} ({:.1} s)",
        build.dataset.len(),
        report.validation_rmse,
        t.elapsed().as_secs_f64()
    );

    let hom_per_cell = args.get(4).copied().unwrap_or(2);
    let (nx, ny) = (hom_per_cell * cells_x, hom_per_cell * cells_y);
    let hom = cantilever(cells_x as f64, cells_y as f64, nx, ny, q0)?;
    let b = solve_macro(
        &hom.mesh,
        &hom.bc,
        &Provider::Surrogate(model),
        &MacroOptions::default(),
    )?;
    let tip_hom = b.u[hom.tip];
    println!(
        "homogenized: {nx}×{ny} elements, tip u = ({:.6}, {:.6}), {} extrapolation warnings",
        tip_hom[0],
        tip_hom[1],
        b.warnings.len()
    );

    if std::env::var_os("CANTILEVER_NESTED").is_some() {
        let t = Instant::now();
        let nested = Provider::Nested(NestedProvider::new(
            rve_copy,
            SolverOptions::default(),
            true,
        )?);
        let c = solve_macro(&hom.mesh, &hom.bc, &nested, &MacroOptions::default())?;
        println!(
            "nested homogenized: tip u = ({:.6}, {:.6}) ({:.1} s)",
            c.u[hom.tip][0],
            c.u[hom.tip][1],
            t.elapsed().as_secs_f64()
        );
    }

    let rel = (tip_hom[1] - tip_full[1]).abs() / tip_full[1].abs();
    let s11 = element_average_s(&b, hom.mesh.element_count(), 0, 0);
    let osc = row_oscillation(&s11, nx, ny)?;
    println!("relative tip difference {rel:.3e}");
    println!(
        "homogenized S11 row oscillation {:.2}% of range",
        100.0 * osc
    );
    Ok(())
}

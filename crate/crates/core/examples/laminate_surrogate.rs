//! Database generation and surrogate training on the laminate RVE, with the
//! files written, read back and the surrogate stress checked against the
//! spectral solver at held-out points.
//!
//! ```text
//! cargo run --release --example laminate_surrogate -- [samples] [outdir]
//! ```

use std::path::PathBuf;

use homogen::config::stage_seed;
use homogen::dataset::{build_dataset, read_dataset, split, write_dataset, SamplingBox};
use homogen::micro::{MicroSolver, SolverOptions};
use homogen::surrogate::{rmse, train_with_validation, Architecture, HdmrModel, TrainOptions};
use homogen::validate::default_laminate;

fn main() -> homogen::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples = args.next().and_then(|a| a.parse().ok()).unwrap_or(2500);
    let dir = PathBuf::from(
        args.next()
            .unwrap_or_else(|| std::env::temp_dir().display().to_string()),
    );
    let seed = 20240501;

    let rve = default_laminate(31)?;
    let build = build_dataset(
        &rve,
        &SamplingBox::laminate_default(),
        samples,
        seed,
        &SolverOptions::default(),
    )?;
    println!(
        "{} records, {} rejected",
        build.dataset.len(),
        build.rejects.len()
    );
    let data_path = dir.join("laminate.csv");
    write_dataset(&data_path, &build.dataset)?;
    let data = read_dataset(&data_path)?;

    let (tr, val) = split(&data, 0.8, stage_seed(seed, "split"))?;
    let opts = TrainOptions {
        seed: stage_seed(seed, "train"),
        ..TrainOptions::default()
    };
    let (model, report) =
        train_with_validation(&tr, Some(&val), Architecture::new(5, 4, 10)?, &opts)?;
    println!(
        "{} weights, {:?} fine-tune: train RMSE {:.2e}, validation RMSE {:.2e}",
        model.weight_count(),
        report.fine_tune,
        report.train_rmse,
        report.validation_rmse
    );

    let model_path = dir.join("laminate_model.json");
    model.save(&model_path)?;
    let model = HdmrModel::load(&model_path)?;
    println!("reloaded model validation RMSE {:.2e}", rmse(&model, &val));

    let solver = MicroSolver::new(rve, SolverOptions::default())?;
    let mut worst: f64 = 0.0;
    for r in val.records.iter().take(20) {
        let f = r.fbar()?;
        let (_, p, _) = model.response(&f)?;
        let exact = solver.solve(&f)?.pbar;
        worst = worst.max((p - exact).norm() / exact.norm());
    }
    println!("worst stress error over 20 held-out points {:.2e}", worst);
    println!("files in {}", dir.display());
    Ok(())
}

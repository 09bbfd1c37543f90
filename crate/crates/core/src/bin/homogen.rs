use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use homogen::config::{
    desk_architecture, paper_architecture, paper_training_records, stage_seed, ProblemConfig,
    ProviderKind,
};
use homogen::dataset::{
    build_dataset, build_dataset_with, read_dataset, split, write_dataset, write_reject_log,
};
use homogen::fem::{solve_macro, write_solution, NestedProvider, Provider};
use homogen::micro::{write_field_csv, MicroSolver};
use homogen::oracles::{
    central_diff_tangent, laminate_energy_stress, toy1d_micro_energy, LaminateProblem,
};
use homogen::surrogate::{train_with_validation, Architecture, HdmrModel};
use homogen::tensor::Tensor2;
use homogen::validate::{run_suite, Suite, ValidateOptions};
use homogen::Error;

#[derive(Parser)]
#[command(
    name = "homogen",
    version,
    about = "Surrogate-assisted two-scale finite-strain homogenization"
)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample F̄ in the configured box and solve one RVE problem per point.
    Sample {
        config: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Reject log for failed samples (default: `<out>.rejects.csv`).
        #[arg(long)]
        rejects: Option<PathBuf>,
        /// Use the published database size unless --count is given.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Fit an HDMR surrogate to a dataset file.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Architecture as L,d,N.
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Training options (the architecture and seed are taken from it if not given).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Published architecture and training-set size.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Solve the RVE problem at one macroscopic deformation gradient.
    Micro {
        config: PathBuf,
        /// F11,F12,F21,F22
        #[arg(long = "Fbar", allow_hyphen_values = true)]
        fbar: String,
        /// Write the converged micro fields as CSV.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Print the laminate oracle next to the FFT result.
        #[arg(long)]
        verify: bool,
    },
    /// Solve the macroscopic boundary value problem.
    Macro {
        config: PathBuf,
        #[arg(long)]
        provider: Option<String>,
        /// Surrogate model file (overrides the config).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an oracle or property suite.
    Validate {
        /// projection | laminate | toy1d | derivatives
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Odd micro-grid size.
        #[arg(long, default_value_t = 31)]
        grid: usize,
        /// Samples per suite (0 = suite default).
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn load_config(path: &Path) -> Result<ProblemConfig, Failure> {
    ProblemConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => Failure::Run(e),
        other => usage(other.to_string()),
    })
}

fn parse_fbar(s: &str) -> Result<Tensor2, Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(format!("--Fbar {s:?}: {e}")))?;
    match v.as_slice() {
        &[a, b, c, d] => Ok(Tensor2::from_rows([[a, b], [c, d]])),
        _ => Err(usage(format!(
            "--Fbar needs four comma-separated values (got {s:?})"
        ))),
    }
}

fn cmd_sample(
    config: &Path,
    count: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    rejects: Option<PathBuf>,
    paper_scale: bool,
) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let n = count.unwrap_or_else(|| cfg.sample_count(paper_scale));
    if n == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let seed = seed.unwrap_or(cfg.seed);
    let b = cfg.sampling_box()?;
    let start = Instant::now();
    let build = if cfg.rve.is_toy() {
        build_dataset_with(
            &b,
            n,
            seed,
            "toy1d: mu(X) = 3/2 + sin(2 pi k X)",
            None,
            |x| toy1d_micro_energy(x[0]),
        )?
    } else {
        let rve = cfg.rve.build()?;
        build_dataset(&rve, &b, n, seed, &cfg.solver.options())?
    };
    write_dataset(out, &build.dataset)?;
    let rejects_path = rejects.unwrap_or_else(|| out.with_extension("rejects.csv"));
    write_reject_log(&rejects_path, &build.rejects)?;
    println!(
        "wrote {} records to {} ({} rejected, seed {seed}, {:.1} s)",
        build.dataset.len(),
        out.display(),
        build.rejects.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_train(
    data: &Path,
    arch: Option<String>,
    seed: Option<u64>,
    out: &Path,
    config: Option<PathBuf>,
    paper_scale: bool,
) -> Result<(), Failure> {
    let cfg = config.as_deref().map(load_config).transpose()?;
    let ds = read_dataset(data)?;
    let dim = ds.dim();
    let arch = match (arch, cfg.as_ref().and_then(|c| c.architecture)) {
        (Some(s), _) => Architecture::parse(&s).map_err(|e| usage(e.to_string()))?,
        (None, Some(a)) => Architecture {
            l: a.l,
            d: a.d,
            n: a.n,
        },
        (None, None) if paper_scale => paper_architecture(dim),
        (None, None) => desk_architecture(dim),
    };
    if arch.d > dim {
        return Err(usage(format!(
            "--arch: reduced dimension d = {} exceeds D = {dim}",
            arch.d
        )));
    }
    let root = seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(ds.seed);
    let opts = cfg
        .as_ref()
        .map(|c| c.training)
        .unwrap_or_default()
        .options(stage_seed(root, "train"));
    let (mut tr, mut val) = if opts.validation_fraction > 0.0 {
        split(
            &ds,
            1.0 - opts.validation_fraction,
            stage_seed(root, "split"),
        )?
    } else {
        (ds.clone(), ds.clone())
    };
    if paper_scale {
        let cap = paper_training_records(dim, &ds.rve_descriptor);
        tr.records.truncate(cap);
        val.records.truncate(cap / 4);
    }
    let start = Instant::now();
    let val_ref = (opts.validation_fraction > 0.0 && !val.is_empty()).then_some(&val);
    let (model, report) = train_with_validation(&tr, val_ref, arch, &opts)?;
    model.save(out)?;
    println!(
        "trained L={},d={},N={} ({} weights) on {} records, {} held out: train RMSE {:.3e}, validation RMSE {:.3e} ({:.1} s)",
        arch.l,
        arch.d,
        arch.n,
        model.weight_count(),
        report.n_train,
        report.n_validation,
        report.train_rmse,
        report.validation_rmse,
        start.elapsed().as_secs_f64()
    );
    println!("model written to {}", out.display());
    Ok(())
}

fn print_tensor(name: &str, t: &Tensor2) {
    let r = t.rows();
    println!(
        "{name} = [[{:.10e}, {:.10e}], [{:.10e}, {:.10e}]]",
        r[0][0], r[0][1], r[1][0], r[1][1]
    );
}

fn cmd_micro(
    config: &Path,
    fbar: &str,
    export: Option<PathBuf>,
    verify: bool,
) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let f = parse_fbar(fbar)?;
    let rve = cfg.rve.build().map_err(|e| usage(e.to_string()))?;
    let solver = MicroSolver::new(rve.clone(), cfg.solver.options())?;
    let sol = solver.solve(&f)?;
    let c = solver.macro_tangent(&sol)?;
    println!("psi_bar = {:.12e}", sol.psi_bar);
    print_tensor("P_bar", &sol.pbar);
    println!("C_bar (rows 11,12,21,22) =");
    for row in c.matrix() {
        println!(
            "  [{:>16.8e} {:>16.8e} {:>16.8e} {:>16.8e}]",
            row[0], row[1], row[2], row[3]
        );
    }
    println!(
        "newton iterations {}, relative residual {:.2e}, CG iterations {}",
        sol.iterations, sol.relative_residual, sol.cg_iterations
    );
    if verify {
        let oracle =
            LaminateProblem::matching(&rve).map_err(|e| usage(format!("--verify: {e}")))?;
        let (psi, p) = laminate_energy_stress(&oracle, &f)?;
        let c_fd = central_diff_tangent(
            |g| laminate_energy_stress(&oracle, g).map(|r| r.1),
            &f,
            1e-6,
        )?;
        println!(
            "{:>8} {:>20} {:>20} {:>10}",
            "", "fft", "laminate oracle", "rel err"
        );
        println!(
            "{:>8} {:>20.12e} {:>20.12e} {:>10.2e}",
            "psi",
            sol.psi_bar,
            psi,
            (sol.psi_bar - psi).abs() / psi.abs().max(f64::MIN_POSITIVE)
        );
        for (k, name) in ["P11", "P12", "P21", "P22"].iter().enumerate() {
            let (a, b) = (sol.pbar.flatten()[k], p.flatten()[k]);
            println!(
                "{name:>8} {a:>20.12e} {b:>20.12e} {:>10.2e}",
                (a - b).abs() / p.max_abs()
            );
        }
        println!(
            "max relative tangent difference {:.2e}",
            (c - c_fd).max_abs() / c_fd.max_abs()
        );
    }
    if let Some(path) = export {
        write_field_csv(&path, &rve, &sol)?;
        println!("fields written to {}", path.display());
    }
    Ok(())
}

fn cmd_macro(
    config: &Path,
    provider: Option<String>,
    model: Option<PathBuf>,
    out: &Path,
) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let mc = cfg
        .macro_problem
        .clone()
        .ok_or_else(|| usage(format!("{} has no \"macro\" section", config.display())))?;
    let kind = match provider {
        Some(p) => p
            .parse::<ProviderKind>()
            .map_err(|e| usage(e.to_string()))?,
        None => mc.provider.unwrap_or(ProviderKind::Surrogate),
    };
    let (mesh, bc, tip) = mc.mesh.build()?;
    let provider = match kind {
        ProviderKind::Surrogate => {
            let path = model
                .or(mc.model.clone())
                .ok_or_else(|| usage("the surrogate provider needs --model or macro.model"))?;
            Provider::Surrogate(HdmrModel::load(&path)?)
        }
        ProviderKind::Nested => {
            let rve = cfg.rve.build()?;
            Provider::Nested(NestedProvider::new(
                rve,
                cfg.solver.options(),
                mc.warm_start,
            )?)
        }
        ProviderKind::Direct => Provider::Direct(cfg.rve.build()?.materials().to_vec()),
    };
    let start = Instant::now();
    let sol = solve_macro(&mesh, &bc, &provider, &mc.options())?;
    write_solution(out, &mesh, &sol)?;
    let node = tip.unwrap_or_else(|| {
        (0..sol.u.len())
            .max_by(|&a, &b| {
                let n = |i: usize| sol.u[i][0].hypot(sol.u[i][1]);
                n(a).total_cmp(&n(b))
            })
            .unwrap_or(0)
    });
    let x = mesh.nodes()[node];
    println!(
        "tip node {node} at ({:.4}, {:.4}): u1 = {:.10e}, u2 = {:.10e} [provider {}, {} elements, {} micro-solves, {} warnings, {:.1} s]",
        x[0],
        x[1],
        sol.u[node][0],
        sol.u[node][1],
        provider.name(),
        mesh.element_count(),
        sol.micro_solves,
        sol.warnings.len(),
        start.elapsed().as_secs_f64()
    );
    println!("solution written to {}", out.display());
    Ok(())
}

fn cmd_validate(
    suite: &str,
    seed: Option<u64>,
    grid: usize,
    samples: usize,
) -> Result<bool, Failure> {
    let suite: Suite = suite.parse().map_err(|e: Error| usage(e.to_string()))?;
    if grid.is_multiple_of(2) || grid < 3 {
        return Err(usage(format!(
            "--grid must be odd and at least 3 (got {grid})"
        )));
    }
    let opts = ValidateOptions {
        seed: seed.unwrap_or(ValidateOptions::default().seed),
        grid,
        samples,
    };
    let report = run_suite(suite, &opts)?;
    println!("{report}");
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    match cli.command {
        Command::Sample {
            config,
            count,
            seed,
            out,
            rejects,
            paper_scale,
        } => cmd_sample(&config, count, seed, &out, rejects, paper_scale).map(|_| true),
        Command::Train {
            data,
            arch,
            seed,
            out,
            config,
            paper_scale,
        } => cmd_train(&data, arch, seed, &out, config, paper_scale).map(|_| true),
        Command::Micro {
            config,
            fbar,
            export,
            verify,
        } => cmd_micro(&config, &fbar, export, verify).map(|_| true),
        Command::Macro {
            config,
            provider,
            model,
            out,
        } => cmd_macro(&config, provider, model, &out).map(|_| true),
        Command::Validate {
            suite,
            seed,
            grid,
            samples,
        } => cmd_validate(&suite, seed, grid, samples),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error [{}]: {e}", e.tag());
            ExitCode::from(1)
        }
    }
}

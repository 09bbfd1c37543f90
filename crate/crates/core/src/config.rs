//! JSON problem files. Unknown keys are rejected and every section is checked
//! by [`ProblemConfig::validate`] before any computation starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::SamplingBox;
use crate::error::{Error, Result};
use crate::fem::{self, MacroMesh, MacroOptions, MacroProblem};
use crate::materials::{Material, NeoHookeanA, NeoHookeanB};
use crate::micro::{RveGrid, RveProblem, SolverOptions};
use crate::surrogate::{Architecture, TrainOptions};

/// Desk-scale database size.
pub const DESK_SAMPLES: usize = 2000;
/// Database size of the published runs.
pub const PAPER_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialConfig {
    /// Give `beta` directly or derive it from `poisson`.
    NeoHookeanA {
        mu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        poisson: Option<f64>,
    },
    NeoHookeanB {
        young: f64,
        poisson: f64,
    },
}

impl MaterialConfig {
    pub fn build(&self) -> Result<Material> {
        match *self {
            MaterialConfig::NeoHookeanA { mu, beta, poisson } => match (beta, poisson) {
                (Some(b), None) => Ok(NeoHookeanA::new(mu, b)?.into()),
                (None, Some(nu)) => Ok(NeoHookeanA::from_poisson(mu, nu)?.into()),
                _ => Err(Error::invalid(
                    "neo_hookean_a needs exactly one of beta or poisson",
                )),
            },
            MaterialConfig::NeoHookeanB { young, poisson } => {
                Ok(NeoHookeanB::new(young, poisson)?.into())
            }
        }
    }
}

fn default_grid() -> [usize; 2] {
    [31, 31]
}

fn default_half_length() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RveConfig {
    /// Two layers normal to `X1`; phase 0 on the left.
    Laminate {
        #[serde(default = "default_grid")]
        grid: [usize; 2],
        #[serde(default = "default_half_length")]
        half_length: [f64; 2],
        materials: [MaterialConfig; 2],
    },
    Inclusion {
        #[serde(default = "default_grid")]
        grid: [usize; 2],
        #[serde(default = "default_half_length")]
        half_length: [f64; 2],
        #[serde(default = "default_fraction")]
        volume_fraction: f64,
        matrix: MaterialConfig,
        inclusion: MaterialConfig,
    },
    Homogeneous {
        #[serde(default = "default_grid")]
        grid: [usize; 2],
        #[serde(default = "default_half_length")]
        half_length: [f64; 2],
        material: MaterialConfig,
    },
    /// The one-dimensional bar with `μ(X) = 3/2 + sin(2πkX)`; no pixel RVE.
    Toy1d,
}

impl RveConfig {
    pub fn is_toy(&self) -> bool {
        matches!(self, RveConfig::Toy1d)
    }

    /// The pixel RVE; errors for the 1D toy problem.
    pub fn build(&self) -> Result<RveProblem> {
        match self {
            RveConfig::Laminate {
                grid,
                half_length,
                materials,
            } => Ok(RveProblem::laminate(
                RveGrid::new(*grid, *half_length)?,
                materials[0].build()?,
                materials[1].build()?,
            )),
            RveConfig::Inclusion {
                grid,
                half_length,
                volume_fraction,
                matrix,
                inclusion,
            } => RveProblem::circular_inclusion(
                RveGrid::new(*grid, *half_length)?,
                matrix.build()?,
                inclusion.build()?,
                *volume_fraction,
            ),
            RveConfig::Homogeneous {
                grid,
                half_length,
                material,
            } => Ok(RveProblem::homogeneous(
                RveGrid::new(*grid, *half_length)?,
                material.build()?,
            )),
            RveConfig::Toy1d => Err(Error::invalid("the toy1d problem has no pixel RVE")),
        }
    }

    fn default_box(&self) -> SamplingBox {
        match self {
            RveConfig::Inclusion { .. } => SamplingBox::inclusion_default(),
            RveConfig::Toy1d => SamplingBox::new(vec![-0.5], vec![1.5]).expect("valid box"),
            _ => SamplingBox::laminate_default(),
        }
    }

    /// Training-set size of the published runs.
    fn paper_training_records(&self) -> usize {
        match self {
            RveConfig::Toy1d => 1_000,
            RveConfig::Inclusion { .. } => 30_000,
            _ => 50_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub cg_tol: f64,
    pub cg_max_iter: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverConfig {
            newton_tol: d.newton_tol,
            newton_max_iter: d.newton_max_iter,
            cg_tol: d.cg_tol,
            cg_max_iter: d.cg_max_iter,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    #[serde(rename = "L")]
    pub l: usize,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub validation_fraction: f64,
    pub component_iters: usize,
    pub fine_tune_iters: usize,
    pub tol: f64,
    pub lm_weight_limit: usize,
    pub adam_learning_rate: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let d = TrainOptions::default();
        TrainingConfig {
            validation_fraction: d.validation_fraction,
            component_iters: d.component_iters,
            fine_tune_iters: d.fine_tune_iters,
            tol: d.tol,
            lm_weight_limit: d.lm_weight_limit,
            adam_learning_rate: d.adam_learning_rate,
        }
    }
}

impl TrainingConfig {
    pub fn options(&self, seed: u64) -> TrainOptions {
        TrainOptions {
            seed,
            validation_fraction: self.validation_fraction,
            component_iters: self.component_iters,
            fine_tune_iters: self.fine_tune_iters,
            tol: self.tol,
            lm_weight_limit: self.lm_weight_limit,
            adam_learning_rate: self.adam_learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshConfig {
    Cook {
        nx: usize,
        ny: usize,
        traction: f64,
    },
    Cantilever {
        length: f64,
        height: f64,
        nx: usize,
        ny: usize,
        traction: f64,
    },
    /// Resolved inclusions; element tag 1 marks inclusion material.
    CantileverFullfield {
        cells_x: usize,
        cells_y: usize,
        per_cell: usize,
        #[serde(default = "default_fraction")]
        volume_fraction: f64,
        traction: f64,
    },
    File {
        path: PathBuf,
    },
}

impl MeshConfig {
    /// Mesh, boundary conditions and report node (`None` for mesh files).
    pub fn build(&self) -> Result<(MacroMesh, fem::BoundaryConditions, Option<usize>)> {
        let done = |p: MacroProblem| Ok((p.mesh, p.bc, Some(p.tip)));
        match self {
            MeshConfig::Cook { nx, ny, traction } => done(fem::cook_membrane(*nx, *ny, *traction)?),
            MeshConfig::Cantilever {
                length,
                height,
                nx,
                ny,
                traction,
            } => done(fem::cantilever(*length, *height, *nx, *ny, *traction)?),
            MeshConfig::CantileverFullfield {
                cells_x,
                cells_y,
                per_cell,
                volume_fraction,
                traction,
            } => {
                if !(*volume_fraction > 0.0 && *volume_fraction < std::f64::consts::FRAC_PI_4) {
                    return Err(Error::invalid(format!(
                        "inclusion fraction {volume_fraction} does not fit a unit cell"
                    )));
                }
                let radius = (volume_fraction / std::f64::consts::PI).sqrt();
                done(fem::cantilever_fullfield(
                    *cells_x, *cells_y, *per_cell, radius, *traction,
                )?)
            }
            MeshConfig::File { path } => {
                let (m, bc) = fem::read_mesh(path)?;
                Ok((m, bc, None))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Surrogate,
    Nested,
    Direct,
}

impl std::str::FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "surrogate" => Ok(ProviderKind::Surrogate),
            "nested" => Ok(ProviderKind::Nested),
            "direct" => Ok(ProviderKind::Direct),
            _ => Err(Error::invalid(format!(
                "unknown provider {s:?} (surrogate|nested|direct)"
            ))),
        }
    }
}

fn default_load_steps() -> usize {
    MacroOptions::default().load_steps
}

fn default_macro_tol() -> f64 {
    MacroOptions::default().tol
}

fn default_macro_iter() -> usize {
    MacroOptions::default().max_iter
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroConfig {
    pub mesh: MeshConfig,
    #[serde(default = "default_load_steps")]
    pub load_steps: usize,
    #[serde(default = "default_macro_tol")]
    pub tol: f64,
    #[serde(default = "default_macro_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub provider: Option<ProviderKind>,
    /// Trained surrogate used by the surrogate provider.
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Reuse each quadrature point's last micro fluctuation (nested provider).
    #[serde(default = "default_true")]
    pub warm_start: bool,
}

impl MacroConfig {
    pub fn options(&self) -> MacroOptions {
        MacroOptions {
            load_steps: self.load_steps,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Root seed; stages use [`stage_seed`].
    pub seed: u64,
    pub rve: RveConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub architecture: Option<ArchitectureConfig>,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default, rename = "macro")]
    pub macro_problem: Option<MacroConfig>,
}

/// Deterministic per-stage seed derived from the root seed.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    // FNV-1a of the stage name, mixed with splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Published architecture for an input dimension.
pub fn paper_architecture(dim: usize) -> Architecture {
    if dim == 1 {
        Architecture { l: 2, d: 1, n: 5 }
    } else {
        Architecture {
            l: 15,
            d: dim,
            n: 20,
        }
    }
}

/// Desk-scale architecture for an input dimension.
pub fn desk_architecture(dim: usize) -> Architecture {
    if dim == 1 {
        Architecture { l: 2, d: 1, n: 5 }
    } else {
        Architecture {
            l: 5,
            d: dim,
            n: 10,
        }
    }
}

/// Published training-set size inferred from a dataset's RVE descriptor.
pub fn paper_training_records(dim: usize, rve_descriptor: &str) -> usize {
    if dim == 1 {
        RveConfig::Toy1d.paper_training_records()
    } else if rve_descriptor.contains("E=1000") {
        30_000
    } else {
        50_000
    }
}

impl ProblemConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: ProblemConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative model and mesh paths are
    /// taken relative to the directory of the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        if let (Some(base), Some(m)) = (path.parent(), cfg.macro_problem.as_mut()) {
            let rebase = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            if let Some(model) = m.model.as_mut() {
                rebase(model);
            }
            if let MeshConfig::File { path } = &mut m.mesh {
                rebase(path);
            }
        }
        Ok(cfg)
    }

    /// Checks every section that the commands will later build from.
    pub fn validate(&self) -> Result<()> {
        if !self.rve.is_toy() {
            self.rve.build()?;
        }
        self.solver.options().validate()?;
        let b = self.sampling_box()?;
        let expected = if self.rve.is_toy() { 1 } else { 4 };
        if b.dim() != expected {
            return Err(Error::invalid(format!(
                "sampling box has {} components, the problem needs {expected}",
                b.dim()
            )));
        }
        if self.sampling.count == Some(0) {
            return Err(Error::invalid("sampling count must be at least 1"));
        }
        if let Some(a) = self.architecture {
            let arch = Architecture::new(a.l, a.d, a.n)?;
            if arch.d > expected {
                return Err(Error::invalid(format!(
                    "reduced dimension d = {} exceeds D = {expected}",
                    arch.d
                )));
            }
        }
        let t = &self.training;
        if !(0.0..1.0).contains(&t.validation_fraction)
            || !(t.tol >= 0.0)
            || !(t.adam_learning_rate > 0.0)
        {
            return Err(Error::invalid(format!("invalid training options {t:?}")));
        }
        if let Some(m) = &self.macro_problem {
            if self.rve.is_toy() {
                return Err(Error::invalid("macro section needs a 2D RVE"));
            }
            if m.load_steps == 0 || m.max_iter == 0 || !(m.tol > 0.0) {
                return Err(Error::invalid(
                    "macro load_steps, max_iter and tol must be positive",
                ));
            }
            if !matches!(m.mesh, MeshConfig::File { .. }) {
                m.mesh.build()?;
            }
        }
        Ok(())
    }

    pub fn sampling_box(&self) -> Result<SamplingBox> {
        let d = self.rve.default_box();
        SamplingBox::new(
            self.sampling.lower.clone().unwrap_or(d.lower),
            self.sampling.upper.clone().unwrap_or(d.upper),
        )
    }

    pub fn sample_count(&self, paper_scale: bool) -> usize {
        self.sampling.count.unwrap_or(if paper_scale {
            PAPER_SAMPLES
        } else {
            DESK_SAMPLES
        })
    }

    pub fn architecture(&self, paper_scale: bool) -> Architecture {
        let dim = if self.rve.is_toy() { 1 } else { 4 };
        match self.architecture {
            Some(a) => Architecture {
                l: a.l,
                d: a.d,
                n: a.n,
            },
            None if paper_scale => paper_architecture(dim),
            None => desk_architecture(dim),
        }
    }

    pub fn paper_training_records(&self) -> usize {
        self.rve.paper_training_records()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMINATE: &str = r#"{
        "seed": 7,
        "rve": {"kind": "laminate", "grid": [15, 15],
                "materials": [{"model": "neo_hookean_a", "mu": 100, "beta": 1},
                              {"model": "neo_hookean_a", "mu": 1000, "beta": 1}]},
        "macro": {"mesh": {"kind": "cook", "nx": 4, "ny": 4, "traction": 4}, "provider": "direct"}
    }"#;

    #[test]
    fn laminate_config_builds() {
        let cfg = ProblemConfig::parse(LAMINATE, Path::new("lam.json")).unwrap();
        let rve = cfg.rve.build().unwrap();
        assert_eq!(rve.grid().n(), [15, 15]);
        assert_eq!(cfg.sampling_box().unwrap(), SamplingBox::laminate_default());
        assert_eq!(cfg.sample_count(false), DESK_SAMPLES);
        assert_eq!(cfg.sample_count(true), PAPER_SAMPLES);
        assert_eq!(cfg.architecture(true), Architecture { l: 15, d: 4, n: 20 });
        let m = cfg.macro_problem.as_ref().unwrap();
        assert_eq!(m.load_steps, 10);
        assert_eq!(m.provider, Some(ProviderKind::Direct));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = LAMINATE.replace("\"seed\": 7", "\"seed\": 7, \"sead\": 1");
        assert!(matches!(
            ProblemConfig::parse(&bad, Path::new("x")),
            Err(Error::Parse { .. })
        ));
        let bad = LAMINATE.replace("\"beta\": 1}", "\"beta\": 1, \"nu\": 0.3}");
        assert!(ProblemConfig::parse(&bad, Path::new("x")).is_err());
        let bad = LAMINATE.replace("\"nx\": 4", "\"nx\": 4, \"nz\": 2");
        assert!(ProblemConfig::parse(&bad, Path::new("x")).is_err());
    }

    #[test]
    fn semantic_errors_are_caught_before_use() {
        let even = LAMINATE.replace("[15, 15]", "[16, 16]");
        assert!(ProblemConfig::parse(&even, Path::new("x")).is_err());
        let both = LAMINATE.replace("\"beta\": 1}", "\"beta\": 1, \"poisson\": 0.3}");
        assert!(ProblemConfig::parse(&both, Path::new("x")).is_err());
        let toy =
            r#"{"seed": 1, "rve": {"kind": "toy1d"}, "architecture": {"L": 2, "d": 3, "N": 5}}"#;
        assert!(ProblemConfig::parse(toy, Path::new("x")).is_err());
    }

    #[test]
    fn stage_seeds_differ_and_repeat() {
        assert_eq!(stage_seed(1, "sample"), stage_seed(1, "sample"));
        assert_ne!(stage_seed(1, "sample"), stage_seed(1, "train"));
        assert_ne!(stage_seed(1, "sample"), stage_seed(2, "sample"));
    }
}

//! Sampled `(F̄, ψ̄)` databases: box sampling, batch micro-solves, splits and
//! the line-oriented dataset file.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::micro::{MicroSolver, RveProblem, SolverOptions};
use crate::tensor::Tensor2;

/// Samples with `det F̄` at or below this value are redrawn.
pub const MIN_SAMPLE_DET: f64 = 0.05;
pub const FORMAT_VERSION: u32 = 1;

/// Axis-aligned box of admissible inputs, one interval per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SamplingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(
                "sampling box bounds must be non-empty and of equal length",
            ));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::invalid(format!(
                "sampling box needs lower < upper componentwise (got {lower:?} / {upper:?})"
            )));
        }
        Ok(SamplingBox { lower, upper })
    }

    /// Box for `F̄ = [[F11, F12], [F21, F22]]` with diagonal entries in
    /// `[d_lo, d_hi]` and off-diagonal entries in `[-off, off]`.
    pub fn deformation(d_lo: f64, d_hi: f64, off: f64) -> Result<Self> {
        Self::new(vec![d_lo, -off, -off, d_lo], vec![d_hi, off, off, d_hi])
    }

    /// Diagonal 0.7–1.3, off-diagonal ±0.3.
    pub fn laminate_default() -> Self {
        Self::deformation(0.7, 1.3, 0.3).expect("valid box")
    }

    /// Diagonal 0.8–1.2, off-diagonal ±0.5.
    pub fn inclusion_default() -> Self {
        Self::deformation(0.8, 1.2, 0.5).expect("valid box")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }
}

/// One database entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRecord {
    /// `F̄` flattened as `[F11, F12, F21, F22]`, or the scalar strain for 1D data.
    pub x: Vec<f64>,
    pub psi_bar: f64,
}

impl EnergyRecord {
    pub fn fbar(&self) -> Result<Tensor2> {
        match self.x.as_slice() {
            &[a, b, c, d] => Ok(Tensor2::from_rows([[a, b], [c, d]])),
            _ => Err(Error::invalid("record is not a 2D deformation gradient")),
        }
    }
}

/// A failed sample point, kept out of the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Reject {
    pub index: usize,
    pub x: Vec<f64>,
    pub tag: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<EnergyRecord>,
    pub sampling_box: SamplingBox,
    pub seed: u64,
    pub rve_descriptor: String,
    /// Micro-grid size, if the records came from a pixel RVE.
    pub grid: Option<[usize; 2]>,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.sampling_box.dim()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn with_records(&self, records: Vec<EnergyRecord>) -> Dataset {
        Dataset {
            records,
            sampling_box: self.sampling_box.clone(),
            seed: self.seed,
            rve_descriptor: self.rve_descriptor.clone(),
            grid: self.grid,
        }
    }
}

/// Outcome of a batch build: the dataset plus the reject log.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBuild {
    pub dataset: Dataset,
    pub rejects: Vec<Reject>,
}

/// Draws `n` i.i.d. uniform points from the box. For 2D deformation boxes,
/// points with `det F̄ ≤ 0.05` are redrawn; more rejections than accepted
/// points means the box is badly posed.
pub fn sample_box(b: &SamplingBox, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    draw(b, n, seed, b.dim() == 4)
}

/// Uniform draws without the determinant filter, for generic regression inputs.
pub fn sample_uniform(b: &SamplingBox, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    draw(b, n, seed, false)
}

fn draw(b: &SamplingBox, n: usize, seed: u64, det_filter: bool) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut rejected = 0usize;
    while out.len() < n {
        let x: Vec<f64> = b
            .lower
            .iter()
            .zip(&b.upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect();
        let ok = !det_filter || x[0] * x[3] - x[1] * x[2] > MIN_SAMPLE_DET;
        if ok {
            out.push(x);
        } else {
            rejected += 1;
            if rejected > n {
                return Err(Error::RejectionOverflow {
                    rejected,
                    drawn: rejected + out.len(),
                });
            }
        }
    }
    Ok(out)
}

/// Evaluates `energy` at [`sample_box`] points in parallel; failures go to
/// the reject log. Output order follows sample order regardless of scheduling.
pub fn build_dataset_with<E>(
    b: &SamplingBox,
    n: usize,
    seed: u64,
    descriptor: &str,
    grid: Option<[usize; 2]>,
    energy: E,
) -> Result<DatasetBuild>
where
    E: Fn(&[f64]) -> Result<f64> + Sync,
{
    let points = sample_box(b, n, seed)?;
    build_dataset_from_points(b, points, seed, descriptor, grid, energy)
}

/// As [`build_dataset_with`] for caller-supplied points.
pub fn build_dataset_from_points<E>(
    b: &SamplingBox,
    points: Vec<Vec<f64>>,
    seed: u64,
    descriptor: &str,
    grid: Option<[usize; 2]>,
    energy: E,
) -> Result<DatasetBuild>
where
    E: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = points.len();
    let step = (n / 10).max(1);
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<Result<f64>> = points
        .par_iter()
        .map(|x| {
            let r = energy(x).and_then(|psi| {
                if psi.is_finite() {
                    Ok(psi)
                } else {
                    Err(Error::invalid(format!("non-finite energy {psi}")))
                }
            });
            let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            if k.is_multiple_of(step) {
                log::info!("sampled {k}/{n} points");
            }
            r
        })
        .collect();
    let mut records = Vec::with_capacity(n);
    let mut rejects = Vec::new();
    for (index, (x, r)) in points.into_iter().zip(results).enumerate() {
        match r {
            Ok(psi_bar) => records.push(EnergyRecord { x, psi_bar }),
            Err(e) => rejects.push(Reject {
                index,
                x,
                tag: e.tag(),
                message: e.to_string(),
            }),
        }
    }
    Ok(DatasetBuild {
        dataset: Dataset {
            records,
            sampling_box: b.clone(),
            seed,
            rve_descriptor: descriptor.to_string(),
            grid,
        },
        rejects,
    })
}

/// One micro-solve per sampled `F̄` on the given RVE.
pub fn build_dataset(
    problem: &RveProblem,
    b: &SamplingBox,
    n: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<DatasetBuild> {
    if b.dim() != 4 {
        return Err(Error::invalid(
            "RVE datasets need a 4-component sampling box",
        ));
    }
    let solver = MicroSolver::new(problem.clone(), *opts)?;
    build_dataset_with(
        b,
        n,
        seed,
        &problem.describe(),
        Some(problem.grid().n()),
        |x| {
            let f = Tensor2::try_from_rows([[x[0], x[1]], [x[2], x[3]]])?;
            Ok(solver.solve(&f)?.psi_bar)
        },
    )
}

/// Seeded random partition; each part keeps the original record order.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = d.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher–Yates.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let mut in_train = vec![false; n];
    for &i in &idx[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (r, t) in d.records.iter().zip(in_train) {
        if t {
            train.push(r.clone());
        } else {
            val.push(r.clone());
        }
    }
    Ok((d.with_records(train), d.with_records(val)))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    seed: u64,
    #[serde(rename = "box")]
    sampling_box: SamplingBox,
    rve: String,
    grid: Option<[usize; 2]>,
    dim: usize,
    columns: Vec<String>,
    count: usize,
}

fn columns(dim: usize) -> Vec<String> {
    let mut c: Vec<String> = if dim == 4 {
        ["F11", "F12", "F21", "F22"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        (1..=dim).map(|i| format!("x{i}")).collect()
    };
    c.push("psi".into());
    c
}

/// Writes the dataset: a JSON header line, then one CSV row per record
/// with every value in `{:.16e}` (17 significant digits).
pub fn write_dataset(path: &Path, d: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = Header {
        format_version: FORMAT_VERSION,
        seed: d.seed,
        sampling_box: d.sampling_box.clone(),
        rve: d.rve_descriptor.clone(),
        grid: d.grid,
        dim: d.dim(),
        columns: columns(d.dim()),
        count: d.len(),
    };
    let mut text = serde_json::to_string(&header)?;
    text.push('\n');
    for r in &d.records {
        for v in &r.x {
            text.push_str(&format!("{v:.16e},"));
        }
        text.push_str(&format!("{:.16e}\n", r.psi_bar));
    }
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let first = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(parse_err(
            1,
            format!("unsupported format version {}", header.format_version),
        ));
    }
    if header.sampling_box.dim() != header.dim {
        return Err(parse_err(1, "box dimension does not match dim".into()));
    }
    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| parse_err(lineno, format!("{e}: {line:?}")))?;
        if vals.len() != header.dim + 1 {
            return Err(parse_err(
                lineno,
                format!("expected {} columns, found {}", header.dim + 1, vals.len()),
            ));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(lineno, "non-finite value".into()));
        }
        let psi_bar = vals[header.dim];
        records.push(EnergyRecord {
            x: vals[..header.dim].to_vec(),
            psi_bar,
        });
    }
    if records.len() != header.count {
        return Err(parse_err(
            records.len() + 1,
            format!(
                "header announces {} records, found {}",
                header.count,
                records.len()
            ),
        ));
    }
    Ok(Dataset {
        records,
        sampling_box: header.sampling_box,
        seed: header.seed,
        rve_descriptor: header.rve,
        grid: header.grid,
    })
}

/// Reject log: `index,<inputs>,tag,message`.
pub fn write_reject_log(path: &Path, rejects: &[Reject]) -> Result<()> {
    let mut text = String::from("index,x,tag,message\n");
    for r in rejects {
        let x: Vec<String> = r.x.iter().map(|v| format!("{v:.16e}")).collect();
        text.push_str(&format!(
            "{},{},{},\"{}\"\n",
            r.index,
            x.join(";"),
            r.tag,
            r.message.replace('"', "'")
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{Material, NeoHookeanB};
    use crate::micro::RveGrid;

    #[test]
    fn sampling_is_deterministic_and_in_box() {
        let b = SamplingBox::inclusion_default();
        let a = sample_box(&b, 1000, 7).unwrap();
        assert_eq!(a, sample_box(&b, 1000, 7).unwrap());
        assert_ne!(a, sample_box(&b, 1000, 8).unwrap());
        assert!(a.iter().all(|x| b.contains(x)));
    }

    #[test]
    fn badly_posed_box_overflows() {
        let b = SamplingBox::new(vec![0.0, -0.1, -0.1, -1.0], vec![0.2, 0.1, 0.1, 0.2]).unwrap();
        assert!(matches!(
            sample_box(&b, 100, 1),
            Err(Error::RejectionOverflow { .. })
        ));
        assert!(sample_box(&b, 0, 1).is_err());
    }

    #[test]
    fn homogeneous_dataset_matches_material() {
        let m: Material = NeoHookeanB::new(100.0, 0.4).unwrap().into();
        let p = RveProblem::homogeneous(RveGrid::square(5).unwrap(), m);
        let b = SamplingBox::inclusion_default();
        let out = build_dataset(&p, &b, 20, 3, &SolverOptions::default()).unwrap();
        assert!(out.rejects.is_empty());
        for r in &out.dataset.records {
            let e = m.energy(&r.fbar().unwrap()).unwrap();
            assert!((r.psi_bar - e).abs() <= 1e-12 * e.abs().max(1.0));
        }
    }

    #[test]
    fn failures_are_logged_not_fatal() {
        let b = SamplingBox::new(vec![0.0], vec![1.0]).unwrap();
        let out = build_dataset_with(&b, 50, 1, "toy", None, |x| {
            if x[0] < 0.5 {
                Err(Error::RootFindFailed("x".into()))
            } else {
                Ok(x[0])
            }
        })
        .unwrap();
        assert_eq!(out.dataset.len() + out.rejects.len(), 50);
        assert!(out.rejects.iter().all(|r| r.tag == "RootFindFailed"));
        assert!(out.rejects.windows(2).all(|w| w[0].index < w[1].index));
    }

    #[test]
    fn split_partitions() {
        let b = SamplingBox::new(vec![0.0], vec![1.0]).unwrap();
        let d = build_dataset_with(&b, 10_000, 1, "toy", None, |x| Ok(x[0] * x[0]))
            .unwrap()
            .dataset;
        let (t, v) = split(&d, 0.1, 5).unwrap();
        assert_eq!(t.len(), 1000);
        assert_eq!(v.len(), 9000);
        let mut all: Vec<f64> = t.records.iter().chain(&v.records).map(|r| r.x[0]).collect();
        let mut orig: Vec<f64> = d.records.iter().map(|r| r.x[0]).collect();
        all.sort_by(f64::total_cmp);
        orig.sort_by(f64::total_cmp);
        assert_eq!(all, orig);
        assert_eq!(split(&d, 0.1, 5).unwrap().0, t);
        let two = d.with_records(d.records[..2].to_vec());
        let (a, b2) = split(&two, 0.5, 1).unwrap();
        assert_eq!((a.len(), b2.len()), (1, 1));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let b = SamplingBox::laminate_default();
        let d = build_dataset_with(&b, 25, 9, "synthetic", Some([5, 5]), |x| {
            Ok(x.iter().map(|v| v.sin()).sum::<f64>() / 3.0)
        })
        .unwrap()
        .dataset;
        let dir = tempdir();
        let p = dir.join("d.txt");
        write_dataset(&p, &d).unwrap();
        let back = read_dataset(&p).unwrap();
        assert_eq!(back, d);
        let p2 = dir.join("d2.txt");
        write_dataset(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn malformed_line_is_reported() {
        let dir = tempdir();
        let p = dir.join("bad.txt");
        let b = SamplingBox::new(vec![0.0], vec![1.0]).unwrap();
        let d = build_dataset_with(&b, 3, 1, "toy", None, |x| Ok(x[0]))
            .unwrap()
            .dataset;
        write_dataset(&p, &d).unwrap();
        let mut text = std::fs::read_to_string(&p).unwrap();
        text = text
            .replace("\n2.", "\n2.x")
            .replace("\n1.", "\nx1.")
            .replace("\n3.", "\n3.x");
        text.push_str("1.0,oops\n");
        std::fs::write(&p, text).unwrap();
        match read_dataset(&p) {
            Err(Error::Parse { line, .. }) => assert!(line >= 2),
            other => panic!("unexpected {other:?}"),
        }
        std::fs::remove_dir_all(dir).unwrap();
    }

    fn tempdir() -> std::path::PathBuf {
        use std::sync::atomic::{AtomicUsize, Ordering};
        static N: AtomicUsize = AtomicUsize::new(0);
        let d = std::env::temp_dir().join(format!(
            "homogen-ds-{}-{}",
            std::process::id(),
            N.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::create_dir_all(&d).unwrap();
        d
    }
}

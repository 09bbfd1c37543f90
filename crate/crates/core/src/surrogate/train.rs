use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{split, Dataset};
use crate::error::{Error, Result};
use crate::surrogate::model::{ComponentNet, HdmrModel, Normalization};

/// HDMR layout: `l` components, reduced dimension `d`, `n` hidden neurons each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub l: usize,
    pub d: usize,
    pub n: usize,
}

impl Architecture {
    pub fn new(l: usize, d: usize, n: usize) -> Result<Self> {
        if l == 0 || d == 0 || n == 0 {
            return Err(Error::invalid(format!(
                "architecture entries must be positive (L={l}, d={d}, N={n})"
            )));
        }
        Ok(Architecture { l, d, n })
    }

    /// Parses `"L,d,N"`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!(
                "architecture must be L,d,N (got {s:?})"
            )));
        }
        let mut v = [0usize; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| {
                Error::invalid(format!(
                    "architecture entry {p:?} is not a positive integer"
                ))
            })?;
        }
        Self::new(v[0], v[1], v[2])
    }

    pub fn weight_count(&self, input_dim: usize) -> usize {
        self.l * (self.d * input_dim + self.d + self.n * self.d + 2 * self.n + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub seed: u64,
    /// Share of the dataset held out for validation.
    pub validation_fraction: f64,
    /// Levenberg–Marquardt iterations per greedy component fit.
    pub component_iters: usize,
    /// Iterations of the joint fine-tune over all weights.
    pub fine_tune_iters: usize,
    /// Training stops early once the normalized training RMSE falls below this.
    pub tol: f64,
    /// The fine-tune uses Levenberg–Marquardt up to this many weights and Adam above.
    pub lm_weight_limit: usize,
    pub adam_learning_rate: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            seed: 0,
            validation_fraction: 0.2,
            component_iters: 150,
            fine_tune_iters: 300,
            tol: 1e-12,
            lm_weight_limit: 1000,
            adam_learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    LevenbergMarquardt,
    Adam,
}

/// RMSE values are in normalized energy units (targets scaled to `[−1, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_rmse: f64,
    pub validation_rmse: f64,
    pub n_train: usize,
    pub n_validation: usize,
    pub fine_tune: Optimizer,
    pub iterations: usize,
}

/// Splits off a validation set, then trains on the remainder.
pub fn train(
    ds: &Dataset,
    arch: Architecture,
    opts: &TrainOptions,
) -> Result<(HdmrModel, TrainReport)> {
    if !(0.0..1.0).contains(&opts.validation_fraction) {
        return Err(Error::invalid("validation fraction must lie in [0, 1)"));
    }
    if opts.validation_fraction == 0.0 {
        return train_with_validation(ds, None, arch, opts);
    }
    let (tr, val) = split(ds, 1.0 - opts.validation_fraction, opts.seed ^ 0x5eed_0001)?;
    train_with_validation(
        &tr,
        if val.is_empty() { None } else { Some(&val) },
        arch,
        opts,
    )
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let s = 0.5 * lo.abs().max(1.0);
        (lo - s, hi + s)
    }
}

fn normalization(ds: &Dataset) -> Normalization {
    let dim = ds.dim();
    let mut x_min = vec![f64::INFINITY; dim];
    let mut x_max = vec![f64::NEG_INFINITY; dim];
    let mut f_min = f64::INFINITY;
    let mut f_max = f64::NEG_INFINITY;
    for r in &ds.records {
        for (k, v) in r.x.iter().enumerate() {
            x_min[k] = x_min[k].min(*v);
            x_max[k] = x_max[k].max(*v);
        }
        f_min = f_min.min(r.psi_bar);
        f_max = f_max.max(r.psi_bar);
    }
    for k in 0..dim {
        (x_min[k], x_max[k]) = widen(x_min[k], x_max[k]);
    }
    (f_min, f_max) = widen(f_min, f_max);
    Normalization {
        x_min,
        x_max,
        f_min,
        f_max,
    }
}

/// Greedy component-wise fit of the residual followed by a joint fine-tune.
pub fn train_with_validation(
    tr: &Dataset,
    val: Option<&Dataset>,
    arch: Architecture,
    opts: &TrainOptions,
) -> Result<(HdmrModel, TrainReport)> {
    let dim = tr.dim();
    if arch.d > dim {
        return Err(Error::invalid(format!(
            "reduced dimension d = {} exceeds input dimension D = {dim}",
            arch.d
        )));
    }
    let weights = arch.weight_count(dim);
    if tr.is_empty() || tr.len() * 2 < weights {
        return Err(Error::InsufficientData {
            records: tr.len(),
            weights,
        });
    }
    if tr
        .records
        .iter()
        .any(|r| r.x.len() != dim || !r.psi_bar.is_finite())
    {
        return Err(Error::invalid(
            "training records must be finite and match the dataset dimension",
        ));
    }
    let norm = normalization(tr);
    let xi: Vec<Vec<f64>> = tr
        .records
        .iter()
        .map(|r| norm.to_normalized(&r.x))
        .collect();
    let y: Vec<f64> = tr
        .records
        .iter()
        .map(|r| norm.energy_to_normalized(r.psi_bar))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let comps: Vec<ComponentNet> = (0..arch.l)
        .map(|_| init_component(dim, arch, &mut rng))
        .collect();
    let mut model = HdmrModel::new(dim, comps, norm)?;

    let mut iterations = 0;
    let mut others = vec![0.0; y.len()];
    for i in 0..arch.l {
        for (o, x) in others.iter_mut().zip(&xi) {
            *o = model
                .components()
                .iter()
                .enumerate()
                .filter(|(j, _)| *j < i)
                .map(|(_, c)| c.value(x))
                .sum();
        }
        let residual_mean = y.iter().zip(&others).map(|(a, b)| a - b).sum::<f64>() / y.len() as f64;
        model.components_mut()[i].v0 = residual_mean;
        iterations += levenberg_marquardt(
            &mut model,
            &[i],
            &xi,
            &y,
            &others,
            opts.component_iters,
            opts.tol,
        )?;
    }
    let all: Vec<usize> = (0..arch.l).collect();
    let zero = vec![0.0; y.len()];
    let fine_tune = if weights <= opts.lm_weight_limit {
        iterations += levenberg_marquardt(
            &mut model,
            &all,
            &xi,
            &y,
            &zero,
            opts.fine_tune_iters,
            opts.tol,
        )?;
        Optimizer::LevenbergMarquardt
    } else {
        iterations += adam(
            &mut model,
            &xi,
            &y,
            opts.fine_tune_iters,
            opts.adam_learning_rate,
            opts.tol,
        )?;
        Optimizer::Adam
    };

    let train_rmse = rmse(&model, tr);
    let validation_rmse = val.map_or(train_rmse, |v| rmse(&model, v));
    if !train_rmse.is_finite() {
        return Err(Error::TrainingDiverged(format!(
            "non-finite training RMSE {train_rmse}"
        )));
    }
    Ok((
        model,
        TrainReport {
            train_rmse,
            validation_rmse,
            n_train: tr.len(),
            n_validation: val.map_or(0, Dataset::len),
            fine_tune,
            iterations,
        },
    ))
}

/// RMSE over `ds` in the model's normalized energy units.
pub fn rmse(model: &HdmrModel, ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let n = model.normalization();
    let s: f64 = ds
        .records
        .iter()
        .map(|r| {
            let g = model.normalized_value(&n.to_normalized(&r.x));
            (g - n.energy_to_normalized(r.psi_bar)).powi(2)
        })
        .sum();
    (s / ds.len() as f64).sqrt()
}

fn init_component(dim: usize, arch: Architecture, rng: &mut ChaCha8Rng) -> ComponentNet {
    let mut c = ComponentNet::zeros(dim, arch.d, arch.n);
    let g = DMatrix::<f64>::from_fn(dim, arch.d, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    for j in 0..arch.d {
        for r in 0..dim {
            c.a[j * dim + r] = q[(r, j)];
        }
    }
    let scale = 1.0 / (arch.d as f64).sqrt();
    for w in c.w.iter_mut() {
        *w = (2.0 * rng.random::<f64>() - 1.0) * scale;
    }
    for v in c.v.iter_mut() {
        *v = rng.random::<f64>() - 0.5;
    }
    c
}

/// Value and parameter gradient of one component (order `A, b, W, v, c, v0`).
fn param_gradient(c: &ComponentNet, xi: &[f64], out: &mut [f64]) -> f64 {
    let dim = xi.len();
    let d = c.d;
    let nh = c.hidden();
    let y: Vec<f64> = (0..d)
        .map(|j| c.b[j] + (0..dim).map(|r| c.a[j * dim + r] * xi[r]).sum::<f64>())
        .collect();
    let (oa, ob, ow) = (0, d * dim, d * dim + d);
    let (ov, oc) = (ow + nh * d, ow + nh * d + nh);
    let o0 = oc + nh;
    let mut z = vec![0.0; d];
    let mut g = c.v0;
    for n in 0..nh {
        let q = c.v[n] + (0..d).map(|j| c.w[n * d + j] * y[j]).sum::<f64>();
        let t = q.tanh();
        let cs = c.c[n] * (1.0 - t * t);
        g += c.c[n] * t;
        out[oc + n] = t;
        out[ov + n] = cs;
        for j in 0..d {
            out[ow + n * d + j] = cs * y[j];
            z[j] += cs * c.w[n * d + j];
        }
    }
    for j in 0..d {
        out[ob + j] = z[j];
        for r in 0..dim {
            out[oa + j * dim + r] = z[j] * xi[r];
        }
    }
    out[o0] = 1.0;
    g
}

fn gather(model: &HdmrModel, active: &[usize]) -> Vec<f64> {
    active
        .iter()
        .flat_map(|&i| model.components()[i].params().collect::<Vec<_>>())
        .collect()
}

fn scatter(model: &mut HdmrModel, active: &[usize], p: &[f64]) {
    let mut off = 0;
    for &i in active {
        let c = &mut model.components_mut()[i];
        let k = c.weight_count();
        c.set_params(&p[off..off + k]);
        off += k;
    }
}

fn loss(model: &HdmrModel, active: &[usize], xi: &[Vec<f64>], y: &[f64], base: &[f64]) -> f64 {
    xi.iter()
        .zip(y)
        .zip(base)
        .map(|((x, t), b)| {
            let g: f64 = active
                .iter()
                .map(|&i| model.components()[i].value(x))
                .sum::<f64>()
                + b;
            (g - t).powi(2)
        })
        .sum()
}

/// Residual vector and Jacobian for the active components.
fn jacobian(
    model: &HdmrModel,
    active: &[usize],
    xi: &[Vec<f64>],
    y: &[f64],
    base: &[f64],
    p: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let m = xi.len();
    let mut e = DVector::zeros(m);
    let mut j = DMatrix::zeros(m, p);
    let mut row = vec![0.0; p];
    for k in 0..m {
        let mut off = 0;
        let mut g = base[k];
        for &i in active {
            let c = &model.components()[i];
            let w = c.weight_count();
            g += param_gradient(c, &xi[k], &mut row[off..off + w]);
            off += w;
        }
        e[k] = g - y[k];
        for (col, v) in row.iter().enumerate() {
            j[(k, col)] = *v;
        }
    }
    (e, j)
}

fn levenberg_marquardt(
    model: &mut HdmrModel,
    active: &[usize],
    xi: &[Vec<f64>],
    y: &[f64],
    base: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<usize> {
    let mut p = gather(model, active);
    let np = p.len();
    let m = xi.len() as f64;
    let mut current = loss(model, active, xi, y, base);
    let mut lambda = 1e-3;
    let mut iters = 0;
    while iters < max_iter {
        if !current.is_finite() {
            return Err(Error::TrainingDiverged(format!("loss became {current}")));
        }
        if (current / m).sqrt() <= tol {
            break;
        }
        let (e, j) = jacobian(model, active, xi, y, base, np);
        let jt = j.transpose();
        let h = &jt * &j;
        let g = &jt * &e;
        let scale = (0..np).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
        iters += 1;
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = h.clone();
            for i in 0..np {
                a[(i, i)] += lambda * (h[(i, i)] + 1e-9 * scale);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            scatter(model, active, &trial);
            let l = loss(model, active, xi, y, base);
            if l.is_finite() && l < current {
                let rel = (current - l) / current.max(1e-300);
                p = trial;
                current = l;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-12 {
                    return Ok(iters);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            scatter(model, active, &p);
            break;
        }
    }
    scatter(model, active, &p);
    Ok(iters)
}

fn adam(
    model: &mut HdmrModel,
    xi: &[Vec<f64>],
    y: &[f64],
    max_iter: usize,
    lr: f64,
    tol: f64,
) -> Result<usize> {
    let all: Vec<usize> = (0..model.components().len()).collect();
    let mut p = gather(model, &all);
    let np = p.len();
    let (b1, b2, eps) = (0.9, 0.999, 1e-12);
    let mut m1 = vec![0.0; np];
    let mut m2 = vec![0.0; np];
    let mut grad = vec![0.0; np];
    let mut row = vec![0.0; np];
    let mut best = (f64::INFINITY, p.clone());
    let n = xi.len() as f64;
    for t in 1..=max_iter {
        grad.iter_mut().for_each(|v| *v = 0.0);
        let mut l = 0.0;
        for (x, target) in xi.iter().zip(y) {
            let mut off = 0;
            let mut g = 0.0;
            for c in model.components() {
                let w = c.weight_count();
                g += param_gradient(c, x, &mut row[off..off + w]);
                off += w;
            }
            let e = g - target;
            l += e * e;
            for (gv, r) in grad.iter_mut().zip(&row) {
                *gv += 2.0 * e * r / n;
            }
        }
        if !l.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "loss became {l} at Adam step {t}"
            )));
        }
        if l < best.0 {
            best = (l, p.clone());
        }
        if (l / n).sqrt() <= tol {
            break;
        }
        let step = lr / (1.0 + t as f64 / max_iter as f64 * 9.0);
        for k in 0..np {
            m1[k] = b1 * m1[k] + (1.0 - b1) * grad[k];
            m2[k] = b2 * m2[k] + (1.0 - b2) * grad[k] * grad[k];
            let mh = m1[k] / (1.0 - b1.powi(t as i32));
            let vh = m2[k] / (1.0 - b2.powi(t as i32));
            p[k] -= step * mh / (vh.sqrt() + eps);
        }
        scatter(model, &all, &p);
    }
    let final_loss = loss(model, &all, xi, y, &vec![0.0; y.len()]);
    if best.0 < final_loss {
        scatter(model, &all, &best.1);
    }
    Ok(max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset_from_points, sample_uniform, SamplingBox};

    fn synthetic(n: usize, f: impl Fn(&[f64]) -> f64 + Sync, dim: usize, seed: u64) -> Dataset {
        let b = SamplingBox::new(vec![-1.0; dim], vec![1.0; dim]).unwrap();
        let pts = sample_uniform(&b, n, seed).unwrap();
        build_dataset_from_points(&b, pts, seed, "synthetic", None, |x| Ok(f(x)))
            .unwrap()
            .dataset
    }

    #[test]
    fn parameter_gradient_matches_differences() {
        let m = HdmrModel::random(3, 2, 1, 4, 5).unwrap();
        let c = &m.components()[0];
        let x = [0.3, -0.7, 0.1];
        let mut g = vec![0.0; c.weight_count()];
        let v = param_gradient(c, &x, &mut g);
        assert!((v - c.value(&x)).abs() < 1e-15);
        let p: Vec<f64> = c.params().collect();
        for k in 0..p.len() {
            let mut cp = c.clone();
            let mut q = p.clone();
            q[k] += 1e-6;
            cp.set_params(&q);
            let up = cp.value(&x);
            q[k] -= 2e-6;
            cp.set_params(&q);
            let fd = (up - cp.value(&x)) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-8, "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn constant_energy_is_fit_exactly() {
        let ds = synthetic(200, |_| 3.25, 4, 1);
        let (m, rep) = train(
            &ds,
            Architecture::new(2, 4, 3).unwrap(),
            &TrainOptions::default(),
        )
        .unwrap();
        assert!(rep.validation_rmse < 1e-10, "{rep:?}");
        assert!((m.evaluate(&[0.1, 0.2, 0.3, 0.4]) - 3.25).abs() < 1e-9);
    }

    #[test]
    fn quadratic_benchmark() {
        let ds = synthetic(2500, |x| x.iter().map(|v| v * v).sum(), 4, 2);
        let opts = TrainOptions {
            seed: 3,
            component_iters: 40,
            fine_tune_iters: 60,
            ..TrainOptions::default()
        };
        let (_, rep) = train(&ds, Architecture::new(5, 4, 10).unwrap(), &opts).unwrap();
        assert_eq!(rep.n_train, 2000);
        assert!(rep.validation_rmse < 1e-2, "{rep:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let ds = synthetic(300, |x| (x[0] * 1.3).sin() + x[1] * x[1], 2, 4);
        let arch = Architecture::new(2, 2, 4).unwrap();
        let opts = TrainOptions {
            component_iters: 20,
            fine_tune_iters: 20,
            ..TrainOptions::default()
        };
        let (a, _) = train(&ds, arch, &opts).unwrap();
        let (b, _) = train(&ds, arch, &opts).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn adam_path_reduces_error() {
        let ds = synthetic(400, |x| x[0] * x[1], 2, 6);
        let arch = Architecture::new(2, 2, 4).unwrap();
        let opts = TrainOptions {
            component_iters: 1,
            fine_tune_iters: 200,
            lm_weight_limit: 0,
            adam_learning_rate: 1e-2,
            ..TrainOptions::default()
        };
        let (_, rep) = train(&ds, arch, &opts).unwrap();
        assert_eq!(rep.fine_tune, Optimizer::Adam);
        assert!(rep.train_rmse < 0.2, "{rep:?}");
    }

    #[test]
    fn errors_for_bad_requests() {
        let ds = synthetic(10, |x| x[0], 4, 1);
        assert!(matches!(
            train(
                &ds,
                Architecture::new(5, 4, 10).unwrap(),
                &TrainOptions::default()
            ),
            Err(Error::InsufficientData { .. })
        ));
        assert!(train(
            &ds,
            Architecture::new(1, 5, 1).unwrap(),
            &TrainOptions::default()
        )
        .is_err());
        assert!(Architecture::parse("5,4").is_err());
        assert_eq!(
            Architecture::parse("2, 1, 5").unwrap(),
            Architecture { l: 2, d: 1, n: 5 }
        );
    }
}

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tensor2, Tensor4};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Inputs further than this fraction of the box width outside the training
/// box are reported as extrapolation.
pub const EXTRAPOLATION_MARGIN: f64 = 0.1;

/// One HDMR component: linear reduction `y = A ξ + b` followed by a single
/// tanh hidden layer, `g = Σ_n c_n tanh(w_n · y + v_n) + v0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentNet {
    /// Reduced dimension.
    pub d: usize,
    /// `d × D`, row-major.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `N × d`, row-major.
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub c: Vec<f64>,
    pub v0: f64,
}

impl ComponentNet {
    pub fn zeros(input_dim: usize, d: usize, hidden: usize) -> Self {
        ComponentNet {
            d,
            a: vec![0.0; d * input_dim],
            b: vec![0.0; d],
            w: vec![0.0; hidden * d],
            v: vec![0.0; hidden],
            c: vec![0.0; hidden],
            v0: 0.0,
        }
    }

    pub fn hidden(&self) -> usize {
        self.c.len()
    }

    pub fn weight_count(&self) -> usize {
        self.a.len() + self.b.len() + self.w.len() + self.v.len() + self.c.len() + 1
    }

    fn validate(&self, input_dim: usize) -> Result<()> {
        let n = self.c.len();
        let d = self.d;
        if n == 0 || d == 0 || d > input_dim {
            return Err(Error::invalid(format!(
                "component needs N >= 1 and 1 <= d <= D (got N = {n}, d = {d}, D = {input_dim})"
            )));
        }
        if self.a.len() != d * input_dim
            || self.b.len() != d
            || self.w.len() != n * d
            || self.v.len() != n
        {
            return Err(Error::invalid("component array sizes are inconsistent"));
        }
        if !self.params().all(f64::is_finite) {
            return Err(Error::invalid("component weights must be finite"));
        }
        Ok(())
    }

    /// Parameters in the fixed order `A, b, W, v, c, v0`.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.a
            .iter()
            .chain(&self.b)
            .chain(&self.w)
            .chain(&self.v)
            .chain(&self.c)
            .copied()
            .chain(std::iter::once(self.v0))
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for slot in self
            .a
            .iter_mut()
            .chain(self.b.iter_mut())
            .chain(self.w.iter_mut())
            .chain(self.v.iter_mut())
            .chain(self.c.iter_mut())
        {
            *slot = it.next().expect("parameter slice too short");
        }
        self.v0 = it.next().expect("parameter slice too short");
    }

    fn reduce(&self, xi: &[f64], y: &mut [f64]) {
        let dd = xi.len();
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self.b[j]
                + self.a[j * dd..(j + 1) * dd]
                    .iter()
                    .zip(xi)
                    .map(|(a, x)| a * x)
                    .sum::<f64>();
        }
    }

    fn pre_activation(&self, n: usize, y: &[f64]) -> f64 {
        let d = self.d;
        self.v[n]
            + self.w[n * d..(n + 1) * d]
                .iter()
                .zip(y)
                .map(|(w, y)| w * y)
                .sum::<f64>()
    }

    /// `(w_n A)_r`.
    fn wa(&self, n: usize, r: usize, input_dim: usize) -> f64 {
        (0..self.d)
            .map(|j| self.w[n * self.d + j] * self.a[j * input_dim + r])
            .sum()
    }

    /// Component value at normalized input `ξ`.
    pub fn value(&self, xi: &[f64]) -> f64 {
        let mut y = vec![0.0; self.d];
        self.reduce(xi, &mut y);
        self.v0
            + (0..self.hidden())
                .map(|n| self.c[n] * self.pre_activation(n, &y).tanh())
                .sum::<f64>()
    }

    /// Adds the component's value, `∂/∂ξ` and (if given) `∂²/∂ξ∂ξ` into the accumulators.
    fn accumulate(&self, xi: &[f64], g: &mut f64, grad: &mut [f64], hess: Option<&mut [f64]>) {
        let dd = xi.len();
        let mut y = vec![0.0; self.d];
        self.reduce(xi, &mut y);
        let mut wa = vec![0.0; dd];
        let mut hess = hess;
        *g += self.v0;
        for n in 0..self.hidden() {
            let t = self.pre_activation(n, &y).tanh();
            let s = 1.0 - t * t;
            *g += self.c[n] * t;
            for (r, slot) in wa.iter_mut().enumerate() {
                *slot = self.wa(n, r, dd);
            }
            let c1 = self.c[n] * s;
            for r in 0..dd {
                grad[r] += c1 * wa[r];
            }
            if let Some(h) = hess.as_deref_mut() {
                let c2 = -2.0 * self.c[n] * t * s;
                for r in 0..dd {
                    for q in 0..dd {
                        h[r * dd + q] += c2 * wa[r] * wa[q];
                    }
                }
            }
        }
    }
}

/// Affine maps between physical and normalized ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub f_min: f64,
    pub f_max: f64,
}

impl Normalization {
    fn validate(&self, input_dim: usize) -> Result<()> {
        if self.x_min.len() != input_dim || self.x_max.len() != input_dim {
            return Err(Error::invalid("normalization arity does not match D"));
        }
        if self.x_min.iter().zip(&self.x_max).any(|(a, b)| !(a < b))
            || !(self.f_min < self.f_max)
            || !self.f_min.is_finite()
            || !self.f_max.is_finite()
        {
            return Err(Error::invalid(
                "normalization needs max > min in every range",
            ));
        }
        Ok(())
    }

    /// `ξ_r = 2 (x_r − x_min,r) / Δx_r − 1`.
    pub fn to_normalized(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.x_min.iter().zip(&self.x_max))
            .map(|(v, (lo, hi))| 2.0 * (v - lo) / (hi - lo) - 1.0)
            .collect()
    }

    /// Inverse of the energy scaling `ĝ = 2 (f − f_min) / Δf − 1`.
    pub fn energy_from_normalized(&self, g: f64) -> f64 {
        0.5 * (self.f_max - self.f_min) * (g + 1.0) + self.f_min
    }

    pub fn energy_to_normalized(&self, f: f64) -> f64 {
        2.0 * (f - self.f_min) / (self.f_max - self.f_min) - 1.0
    }

    pub fn delta_f(&self) -> f64 {
        self.f_max - self.f_min
    }

    pub fn delta_x(&self, r: usize) -> f64 {
        self.x_max[r] - self.x_min[r]
    }
}

/// Input outside the training box by more than [`EXTRAPOLATION_MARGIN`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationWarning {
    pub component: usize,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl std::fmt::Display for ExtrapolationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "surrogate input component {} = {:.6} outside training range [{:.6}, {:.6}]",
            self.component, self.value, self.lower, self.upper
        )
    }
}

/// `f(x) = Δf/2 · [Σ_i g_i(ξ(x)) + 1] + f_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct HdmrModel {
    input_dim: usize,
    components: Vec<ComponentNet>,
    norm: Normalization,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    #[serde(rename = "D")]
    input_dim: usize,
    #[serde(rename = "d")]
    reduced_dim: usize,
    #[serde(rename = "L")]
    component_count: usize,
    components: Vec<ComponentNet>,
    normalization: Normalization,
}

impl HdmrModel {
    pub fn new(
        input_dim: usize,
        components: Vec<ComponentNet>,
        norm: Normalization,
    ) -> Result<Self> {
        if input_dim == 0 || components.is_empty() {
            return Err(Error::invalid(
                "model needs D >= 1 and at least one component",
            ));
        }
        for c in &components {
            c.validate(input_dim)?;
        }
        norm.validate(input_dim)?;
        Ok(HdmrModel {
            input_dim,
            components,
            norm,
        })
    }

    /// Seeded random weights and normalization, for tests and benchmarks.
    pub fn random(input_dim: usize, d: usize, l: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
        let mut comps = Vec::with_capacity(l);
        for _ in 0..l {
            let mut c = ComponentNet::zeros(input_dim, d, hidden);
            let scale = 1.0 / (d as f64).sqrt();
            c.a.iter_mut().for_each(|v| *v = u(-1.0, 1.0));
            c.b.iter_mut().for_each(|v| *v = u(-0.5, 0.5));
            c.w.iter_mut().for_each(|v| *v = u(-1.0, 1.0) * scale);
            c.v.iter_mut().for_each(|v| *v = u(-0.5, 0.5));
            c.c.iter_mut().for_each(|v| *v = u(-1.0, 1.0));
            c.v0 = u(-0.5, 0.5);
            comps.push(c);
        }
        let x_min: Vec<f64> = (0..input_dim).map(|_| u(-1.0, 0.5)).collect();
        let x_max: Vec<f64> = x_min.iter().map(|lo| lo + u(0.2, 2.0)).collect();
        let f_min = u(-1.0, 1.0);
        let f_max = f_min + u(0.5, 5.0);
        Self::new(
            input_dim,
            comps,
            Normalization {
                x_min,
                x_max,
                f_min,
                f_max,
            },
        )
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn components(&self) -> &[ComponentNet] {
        &self.components
    }

    pub(crate) fn components_mut(&mut self) -> &mut [ComponentNet] {
        &mut self.components
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    pub fn weight_count(&self) -> usize {
        self.components.iter().map(ComponentNet::weight_count).sum()
    }

    fn check_arity(&self, x: &[f64]) {
        assert_eq!(x.len(), self.input_dim, "surrogate input has wrong arity");
    }

    /// `Σ_i g_i(ξ)` in normalized units.
    pub fn normalized_value(&self, xi: &[f64]) -> f64 {
        self.components.iter().map(|c| c.value(xi)).sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.check_arity(x);
        let xi = self.norm.to_normalized(x);
        self.norm.energy_from_normalized(self.normalized_value(&xi))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.derivatives(x, false).1
    }

    /// Row-major `D × D` Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        self.derivatives(x, true).2
    }

    /// Value, gradient and (optionally) Hessian with the normalization chain
    /// rule: `∂f/∂x_r = Δf/Δx_r ∂g/∂ξ_r`, `∂²f/∂x_r∂x_s = 2Δf/(Δx_r Δx_s) ∂²g/∂ξ_r∂ξ_s`.
    pub fn derivatives(&self, x: &[f64], with_hessian: bool) -> (f64, Vec<f64>, Vec<f64>) {
        self.check_arity(x);
        let dd = self.input_dim;
        let xi = self.norm.to_normalized(x);
        let mut g = 0.0;
        let mut grad = vec![0.0; dd];
        let mut hess = vec![0.0; if with_hessian { dd * dd } else { 0 }];
        for c in &self.components {
            c.accumulate(
                &xi,
                &mut g,
                &mut grad,
                if with_hessian { Some(&mut hess) } else { None },
            );
        }
        let df = self.norm.delta_f();
        for (r, v) in grad.iter_mut().enumerate() {
            *v *= df / self.norm.delta_x(r);
        }
        if with_hessian {
            for r in 0..dd {
                for s in 0..dd {
                    hess[r * dd + s] *= 2.0 * df / (self.norm.delta_x(r) * self.norm.delta_x(s));
                }
            }
            // Exact symmetry regardless of summation order.
            for r in 0..dd {
                for s in 0..r {
                    let m = 0.5 * (hess[r * dd + s] + hess[s * dd + r]);
                    hess[r * dd + s] = m;
                    hess[s * dd + r] = m;
                }
            }
        }
        (self.norm.energy_from_normalized(g), grad, hess)
    }

    /// Components of `x` that leave the training box by more than the margin.
    pub fn extrapolation(&self, x: &[f64]) -> Vec<ExtrapolationWarning> {
        x.iter()
            .enumerate()
            .filter_map(|(r, &v)| {
                let (lo, hi) = (self.norm.x_min[r], self.norm.x_max[r]);
                let m = EXTRAPOLATION_MARGIN * (hi - lo);
                (v < lo - m || v > hi + m).then_some(ExtrapolationWarning {
                    component: r,
                    value: v,
                    lower: lo,
                    upper: hi,
                })
            })
            .collect()
    }

    /// Energy of a 2D deformation gradient.
    pub fn energy_f(&self, f: &Tensor2) -> f64 {
        self.evaluate(&f.flatten())
    }

    /// `(ψ̄, P̄, ℂ̄)` for a 2D model.
    pub fn response(&self, f: &Tensor2) -> Result<(f64, Tensor2, Tensor4)> {
        if self.input_dim != 4 {
            return Err(Error::invalid("stress and tangent need a 4-input model"));
        }
        let (e, g, h) = self.derivatives(&f.flatten(), true);
        let mut m = [[0.0; 4]; 4];
        for r in 0..4 {
            m[r].copy_from_slice(&h[r * 4..r * 4 + 4]);
        }
        Ok((
            e,
            Tensor2::unflatten([g[0], g[1], g[2], g[3]]),
            Tensor4::from_matrix(m),
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        let reduced_dim = self.components[0].d;
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            input_dim: self.input_dim,
            reduced_dim,
            component_count: self.components.len(),
            components: self.components.clone(),
            normalization: self.norm.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        if file.component_count != file.components.len() {
            return Err(Error::invalid("L does not match the number of components"));
        }
        Self::new(file.input_dim, file.components, file.normalization)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_norm(dim: usize) -> Normalization {
        Normalization {
            x_min: vec![-1.0; dim],
            x_max: vec![1.0; dim],
            f_min: -1.0,
            f_max: 1.0,
        }
    }

    #[test]
    fn zero_output_weights_give_constant() {
        let mut m = HdmrModel::random(4, 4, 3, 5, 1).unwrap();
        for c in m.components_mut() {
            c.c.iter_mut().for_each(|v| *v = 0.0);
            c.v0 = 0.1;
        }
        let n = m.normalization().clone();
        let expect = 0.5 * n.delta_f() * (0.3 + 1.0) + n.f_min;
        let x = [0.3, -0.2, 0.9, 1.1];
        assert!((m.evaluate(&x) - expect).abs() < 1e-14);
        assert!(m.gradient(&x).iter().all(|&g| g == 0.0));
        assert!(m.hessian(&x).iter().all(|&h| h == 0.0));
    }

    #[test]
    fn single_component_is_plain_network() {
        let mut c = ComponentNet::zeros(2, 2, 3);
        c.a = vec![1.0, 0.0, 0.0, 1.0];
        c.w = vec![0.3, -0.7, 1.1, 0.2, -0.5, 0.4];
        c.v = vec![0.1, -0.2, 0.05];
        c.c = vec![0.8, -1.2, 0.6];
        c.v0 = 0.25;
        let m = HdmrModel::new(2, vec![c.clone()], unit_norm(2)).unwrap();
        let x = [0.4, -0.6];
        let direct: f64 = 0.25
            + (0..3)
                .map(|n| c.c[n] * (c.w[2 * n] * x[0] + c.w[2 * n + 1] * x[1] + c.v[n]).tanh())
                .sum::<f64>();
        assert!((m.evaluate(&x) - direct).abs() < 1e-14);
    }

    #[test]
    fn single_neuron_gradient_by_hand() {
        let mut c = ComponentNet::zeros(1, 1, 1);
        c.a = vec![2.0];
        c.b = vec![0.1];
        c.w = vec![0.5];
        c.v = vec![-0.3];
        c.c = vec![1.5];
        let norm = Normalization {
            x_min: vec![0.0],
            x_max: vec![4.0],
            f_min: 1.0,
            f_max: 3.0,
        };
        let m = HdmrModel::new(1, vec![c], norm).unwrap();
        let x = 1.0;
        let xi: f64 = 2.0 * x / 4.0 - 1.0;
        let q: f64 = 0.5 * (2.0 * xi + 0.1) - 0.3;
        let expect = 1.5 * (1.0 - q.tanh().powi(2)) * (0.5 * 2.0) * (2.0 / 4.0);
        assert!((m.gradient(&[x])[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let c = ComponentNet::zeros(4, 5, 3);
        assert!(HdmrModel::new(4, vec![c], unit_norm(4)).is_err());
        let c = ComponentNet::zeros(4, 4, 3);
        let mut n = unit_norm(4);
        n.f_max = n.f_min;
        assert!(HdmrModel::new(4, vec![c], n).is_err());
    }

    #[test]
    fn extrapolation_is_flagged_beyond_margin() {
        let m = HdmrModel::random(2, 2, 1, 2, 3).unwrap();
        let n = m.normalization().clone();
        let inside = [n.x_max[0] + 0.05 * n.delta_x(0), n.x_min[1]];
        assert!(m.extrapolation(&inside).is_empty());
        let outside = [n.x_max[0] + 0.2 * n.delta_x(0), n.x_min[1]];
        let w = m.extrapolation(&outside);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].component, 0);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = HdmrModel::random(4, 3, 4, 6, 11).unwrap();
        let back = HdmrModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let x = [0.9, 0.1, -0.2, 1.05];
        assert_eq!(back.evaluate(&x).to_bits(), m.evaluate(&x).to_bits());
        assert!(HdmrModel::from_json("{\"format_version\":1}").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn hessian_is_symmetric_and_normalized_inputs_stay_in_box(
            seed in 0u64..10_000,
            t in proptest::collection::vec(0.0f64..=1.0, 4),
        ) {
            let m = HdmrModel::random(4, 4, 2, 3, seed).unwrap();
            let n = m.normalization();
            let x: Vec<f64> = t.iter().enumerate().map(|(r, s)| n.x_min[r] + s * n.delta_x(r)).collect();
            let xi = n.to_normalized(&x);
            prop_assert!(xi.iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
            let h = m.hessian(&x);
            for r in 0..4 {
                for s in 0..4 {
                    prop_assert_eq!(h[r * 4 + s], h[s * 4 + r]);
                }
            }
        }
    }
}

//! A small fully-connected network with weight normalization, trained by
//! Adam on the clamp loss.
//!
//! Parameters live in one flat vector, layer-major, each layer stored as
//! `V` (row-major `out x in`), then `g`, then `b`. The effective weight row
//! is `W[o] = g[o] · V[o] / ‖V[o]‖`.

mod adam;
mod checkpoint;
mod train;

pub use adam::AdamState;
pub use checkpoint::{load_model, save_model, write_loss_csv, CHECKPOINT_VERSION};
pub use train::{batch_loss, train, TrainConfig, TrainOutcome};

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{DdfError, Result};
use crate::field::Direction2;
use crate::mesh::Vec3;

pub const INPUT_WIDTH: usize = 5;
const V_INIT_STD: f64 = 0.4;

/// `min(δ, max(−δ, x))`. NaN stays NaN so bad predictions surface in the loss.
pub fn clamp(x: f64, delta: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    x.max(-delta).min(delta)
}

/// Network input for an oriented point: the position as is, both angles
/// mapped to `[-1, 1]`.
pub fn encode(x: &Vec3, d: &Direction2) -> [f64; INPUT_WIDTH] {
    use std::f64::consts::PI;
    [
        x.x,
        x.y,
        x.z,
        d.theta0 / PI - 1.0,
        d.theta1 * 2.0 / PI - 1.0,
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl LayerShape {
    fn v(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }
    fn g(&self) -> std::ops::Range<usize> {
        let s = self.offset + self.inputs * self.outputs;
        s..s + self.outputs
    }
    fn b(&self) -> std::ops::Range<usize> {
        let s = self.offset + (self.inputs + 1) * self.outputs;
        s..s + self.outputs
    }
    fn len(&self) -> usize {
        (self.inputs + 2) * self.outputs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    widths: Vec<usize>,
    params: Vec<f64>,
    /// Dropout probability on hidden activations (train mode only).
    pub dropout: f64,
    /// Clamp parameter the model was trained with.
    pub delta: f64,
}

/// Activations kept from a forward pass for the backward pass.
pub struct ForwardCache {
    batch: usize,
    inputs: Vec<f64>,
    /// Per layer: effective weights used in the pass.
    weights: Vec<Vec<f64>>,
    /// Per hidden layer: post-activation (after dropout) values.
    hidden: Vec<Vec<f64>>,
    /// Per hidden layer: derivative factor (relu' times dropout scale).
    gates: Vec<Vec<f64>>,
}

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n);
    // SAFETY: callers pass slices covering the strided extents of the
    // m x k, k x n and m x n (row-major) operands.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl MlpModel {
    fn shapes_for(widths: &[usize]) -> Vec<LayerShape> {
        let mut offset = 0;
        widths
            .windows(2)
            .map(|w| {
                let s = LayerShape {
                    inputs: w[0],
                    outputs: w[1],
                    offset,
                };
                offset += s.len();
                s
            })
            .collect()
    }

    fn shapes(&self) -> Vec<LayerShape> {
        Self::shapes_for(&self.widths)
    }

    pub fn param_count_for(widths: &[usize]) -> usize {
        Self::shapes_for(widths).iter().map(|s| s.len()).sum()
    }

    /// Model from explicit parameters. Fails if the widths are not
    /// `[5, ..., 1]`, the parameter count does not match, or a `V` row is
    /// zero.
    pub fn from_params(widths: Vec<usize>, params: Vec<f64>, dropout: f64, delta: f64) -> Result<Self> {
        if widths.len() < 2 || widths[0] != INPUT_WIDTH || *widths.last().unwrap() != 1 {
            return Err(DdfError::ShapeMismatch(format!(
                "layer widths must run from {INPUT_WIDTH} to 1, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(DdfError::ShapeMismatch("zero-width layer".into()));
        }
        let expected = Self::param_count_for(&widths);
        if params.len() != expected {
            return Err(DdfError::ShapeMismatch(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        let model = MlpModel {
            widths,
            params,
            dropout,
            delta,
        };
        for s in model.shapes() {
            for row in model.params[s.v()].chunks(s.inputs) {
                if row.iter().all(|&v| v == 0.0) {
                    return Err(DdfError::ShapeMismatch("weight direction row is zero".into()));
                }
            }
        }
        Ok(model)
    }

    /// He-style initialization: gains `√2` on hidden layers and small on the
    /// output layer, biases zero. `V` entries are drawn with standard
    /// deviation 0.4. Only row directions matter, so this sets how fast
    /// Adam turns the rows.
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], dropout: f64, delta: f64, rng: &mut R) -> Self {
        let mut widths = vec![INPUT_WIDTH];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let shapes = Self::shapes_for(&widths);
        let mut params = vec![0.0; Self::param_count_for(&widths)];
        for (l, s) in shapes.iter().enumerate() {
            for v in &mut params[s.v()] {
                *v = V_INIT_STD * rng.sample::<f64, _>(StandardNormal);
            }
            let gain = if l + 1 == shapes.len() { 0.1 } else { 2f64.sqrt() };
            params[s.g()].fill(gain);
        }
        MlpModel {
            widths,
            params,
            dropout,
            delta,
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    /// Effective weights `g · V / ‖V‖` of layer `l`, row-major `out x in`.
    pub fn effective_weights(&self, l: usize) -> Vec<f64> {
        let s = self.shapes()[l];
        self.weights_of(&s)
    }

    fn weights_of(&self, s: &LayerShape) -> Vec<f64> {
        let v = &self.params[s.v()];
        let g = &self.params[s.g()];
        let mut w = Vec::with_capacity(v.len());
        for (row, &gain) in v.chunks(s.inputs).zip(g) {
            let scale = gain / row.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.extend(row.iter().map(|x| x * scale));
        }
        w
    }

    /// Batched forward pass over `inputs` (row-major `batch x 5`). Train
    /// mode applies inverted dropout to hidden activations using `rng`.
    pub fn forward_cached(
        &self,
        inputs: &[f64],
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> (Vec<f64>, ForwardCache) {
        let batch = inputs.len() / INPUT_WIDTH;
        let shapes = self.shapes();
        let keep = 1.0 - self.dropout;
        let drop = mode == Mode::Train && self.dropout > 0.0;
        let mut weights = Vec::with_capacity(shapes.len());
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(shapes.len() - 1);
        let mut gates: Vec<Vec<f64>> = Vec::with_capacity(shapes.len() - 1);
        let mut out = Vec::new();
        for (l, s) in shapes.iter().enumerate() {
            let w = self.weights_of(s);
            let x: &[f64] = if l == 0 { inputs } else { &hidden[l - 1] };
            let mut z = vec![0.0; batch * s.outputs];
            gemm(batch, s.inputs, s.outputs, x, (s.inputs, 1), &w, (1, s.inputs), &mut z);
            let bias = &self.params[s.b()];
            for row in z.chunks_mut(s.outputs) {
                for (zi, bi) in row.iter_mut().zip(bias) {
                    *zi += bi;
                }
            }
            weights.push(w);
            if l + 1 == shapes.len() {
                out = z;
            } else {
                let mut gate = vec![0.0; z.len()];
                for (zi, gi) in z.iter_mut().zip(gate.iter_mut()) {
                    let mut factor = if *zi > 0.0 { 1.0 } else { 0.0 };
                    if drop {
                        factor = if rng.gen::<f64>() < self.dropout { 0.0 } else { factor / keep };
                    }
                    *zi = if factor == 0.0 { 0.0 } else { *zi * factor };
                    *gi = factor;
                }
                hidden.push(z);
                gates.push(gate);
            }
        }
        let cache = ForwardCache {
            batch,
            inputs: inputs.to_vec(),
            weights,
            hidden,
            gates,
        };
        (out, cache)
    }

    pub fn forward_batch(&self, inputs: &[f64], mode: Mode, rng: &mut dyn RngCore) -> Vec<f64> {
        self.forward_cached(inputs, mode, rng).0
    }

    /// Deterministic eval-mode forward pass.
    pub fn predict_batch(&self, inputs: &[f64]) -> Vec<f64> {
        self.forward_cached(inputs, Mode::Eval, &mut rand::rngs::mock::StepRng::new(0, 0)).0
    }

    pub fn forward(&self, x: &Vec3, d: &Direction2, mode: Mode, rng: &mut dyn RngCore) -> f64 {
        self.forward_batch(&encode(x, d), mode, rng)[0]
    }

    pub fn predict(&self, x: &Vec3, d: &Direction2) -> f64 {
        self.predict_batch(&encode(x, d))[0]
    }

    /// Reverse pass from output adjoints `d_out` (one per batch row).
    /// Returns gradients with respect to the flat parameters and to the
    /// inputs (row-major `batch x 5`).
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let shapes = self.shapes();
        let batch = cache.batch;
        let mut grads = vec![0.0; self.params.len()];
        let mut dz = d_out.to_vec();
        let mut d_input = Vec::new();
        for (l, s) in shapes.iter().enumerate().rev() {
            let x: &[f64] = if l == 0 { &cache.inputs } else { &cache.hidden[l - 1] };
            let w = &cache.weights[l];

            let mut dw = vec![0.0; s.outputs * s.inputs];
            gemm(s.outputs, batch, s.inputs, &dz, (1, s.outputs), x, (s.inputs, 1), &mut dw);
            let db = &mut grads[s.b()];
            for row in dz.chunks(s.outputs) {
                for (d, r) in db.iter_mut().zip(row) {
                    *d += r;
                }
            }
            // Through the weight normalization.
            let v = &self.params[s.v()];
            let g = &self.params[s.g()];
            let mut dv = vec![0.0; v.len()];
            let mut dg = vec![0.0; s.outputs];
            for o in 0..s.outputs {
                let row = &v[o * s.inputs..(o + 1) * s.inputs];
                let grow = &dw[o * s.inputs..(o + 1) * s.inputs];
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                let proj: f64 = grow.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() / norm;
                dg[o] = proj;
                for i in 0..s.inputs {
                    dv[o * s.inputs + i] = g[o] / norm * grow[i] - g[o] * proj / (norm * norm) * row[i];
                }
            }
            grads[s.v()].copy_from_slice(&dv);
            grads[s.g()].copy_from_slice(&dg);

            let mut dx = vec![0.0; batch * s.inputs];
            gemm(batch, s.outputs, s.inputs, &dz, (s.outputs, 1), w, (s.inputs, 1), &mut dx);
            if l == 0 {
                d_input = dx;
            } else {
                for (d, gate) in dx.iter_mut().zip(&cache.gates[l - 1]) {
                    *d *= gate;
                }
                dz = dx;
            }
        }
        (grads, d_input)
    }

    /// Gradient of the eval-mode output with respect to the 5 encoded
    /// inputs; the first three entries are the spatial gradient.
    pub fn input_gradient(&self, x: &Vec3, d: &Direction2) -> [f64; INPUT_WIDTH] {
        let inputs = encode(x, d);
        let (_, cache) = self.forward_cached(&inputs, Mode::Eval, &mut rand::rngs::mock::StepRng::new(0, 0));
        let (_, dx) = self.backward(&cache, &[1.0]);
        let mut out = [0.0; INPUT_WIDTH];
        out.copy_from_slice(&dx);
        out
    }

    /// Eval-mode outputs and spatial input gradients for many inputs.
    pub fn predict_with_gradient(&self, inputs: &[f64]) -> (Vec<f64>, Vec<Vec3>) {
        let (out, cache) = self.forward_cached(inputs, Mode::Eval, &mut rand::rngs::mock::StepRng::new(0, 0));
        let ones = vec![1.0; out.len()];
        let (_, dx) = self.backward(&cache, &ones);
        let grads = dx
            .chunks(INPUT_WIDTH)
            .map(|r| Vec3::new(r[0], r[1], r[2]))
            .collect();
        (out, grads)
    }

    /// Per-layer pre-activations of an eval pass for one input, used to
    /// keep finite-difference probes away from ReLU kinks.
    pub fn pre_activations(&self, inputs: &[f64; INPUT_WIDTH]) -> Vec<Vec<f64>> {
        let shapes = self.shapes();
        let mut x = inputs.to_vec();
        let mut out = Vec::new();
        for (l, s) in shapes.iter().enumerate() {
            let w = self.weights_of(s);
            let b = &self.params[s.b()];
            let z: Vec<f64> = (0..s.outputs)
                .map(|o| b[o] + (0..s.inputs).map(|i| w[o * s.inputs + i] * x[i]).sum::<f64>())
                .collect();
            out.push(z.clone());
            if l + 1 < shapes.len() {
                x = z.into_iter().map(|v| v.max(0.0)).collect();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(0.05, 0.1), 0.05);
        assert_eq!(clamp(f64::INFINITY, 0.1), 0.1);
        assert_eq!(clamp(-3.0, 0.1), -0.1);
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut m = MlpModel::new(&[8, 8], 0.0, 0.1, &mut rng(0));
        // Zero gains give zero effective weights while V rows stay non-zero.
        let shapes = m.shapes();
        for s in &shapes {
            m.params[s.g()].fill(0.0);
        }
        let last = shapes.last().unwrap();
        m.params[last.b()][0] = 0.37;
        let y = m.predict(&Vec3::new(0.3, -0.2, 0.9), &Direction2::new(1.0, 2.0));
        assert_eq!(y, 0.37);
        let g = m.input_gradient(&Vec3::new(0.3, -0.2, 0.9), &Direction2::new(1.0, 2.0));
        assert_eq!(g, [0.0; 5]);
    }

    #[test]
    fn eval_is_deterministic() {
        let m = MlpModel::new(&[16, 16], 0.5, 0.1, &mut rng(1));
        let x = Vec3::new(0.1, 0.2, 0.3);
        let d = Direction2::new(0.4, 0.5);
        let a = m.forward(&x, &d, Mode::Eval, &mut rng(2));
        let b = m.forward(&x, &d, Mode::Eval, &mut rng(3));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    /// Straight-line reference: explicit loops, no GEMM, no caching.
    fn reference_forward(m: &MlpModel, input: &[f64]) -> f64 {
        let mut x = input.to_vec();
        let n = m.layer_count();
        for l in 0..n {
            let s = m.shapes()[l];
            let v = &m.params[s.v()];
            let g = &m.params[s.g()];
            let b = &m.params[s.b()];
            let mut y = vec![0.0; s.outputs];
            for o in 0..s.outputs {
                let row = &v[o * s.inputs..(o + 1) * s.inputs];
                let norm: f64 = row.iter().map(|a| a * a).sum::<f64>().sqrt();
                let mut acc = 0.0;
                for i in 0..s.inputs {
                    acc += g[o] * row[i] / norm * x[i];
                }
                y[o] = acc + b[o];
                if l + 1 < n {
                    y[o] = y[o].max(0.0);
                }
            }
            x = y;
        }
        x[0]
    }

    #[test]
    fn forward_matches_reference() {
        let mut r = rng(4);
        let m = MlpModel::new(&[7, 9], 0.0, 0.1, &mut r);
        for _ in 0..50 {
            let input: Vec<f64> = (0..5).map(|_| r.gen_range(-1.0..1.0)).collect();
            let got = m.predict_batch(&input)[0];
            assert!((got - reference_forward(&m, &input)).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_rows_match_single_rows() {
        let mut r = rng(5);
        let m = MlpModel::new(&[12, 12, 12], 0.0, 0.1, &mut r);
        let inputs: Vec<f64> = (0..5 * 33).map(|_| r.gen_range(-1.0..1.0)).collect();
        let batch = m.predict_batch(&inputs);
        for (row, y) in inputs.chunks(5).zip(&batch) {
            assert!((m.predict_batch(row)[0] - y).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_model_gradient_is_weight_row() {
        let mut r = rng(6);
        let m = MlpModel::new(&[], 0.0, 0.1, &mut r);
        assert_eq!(m.widths(), &[5, 1]);
        let w = m.effective_weights(0);
        let g = m.input_gradient(&Vec3::new(0.5, 0.1, -0.3), &Direction2::new(2.0, 1.0));
        assert_eq!(&g[..], &w[..]);
    }

    fn kink_free(m: &MlpModel, input: &[f64; 5], margin: f64) -> bool {
        let pre = m.pre_activations(input);
        pre[..pre.len() - 1].iter().flatten().all(|z| z.abs() >= margin)
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut r = rng(7);
        let m = MlpModel::new(&[8, 8], 0.0, 0.1, &mut r);
        let h = 1e-5;
        let mut probes = 0;
        while probes < 100 {
            let input: [f64; 5] = std::array::from_fn(|_| r.gen_range(-1.0..1.0));
            if !kink_free(&m, &input, 1e-3) {
                continue;
            }
            let (_, cache) = m.forward_cached(&input, Mode::Eval, &mut r);
            let (_, grad) = m.backward(&cache, &[1.0]);
            for k in 0..5 {
                let mut plus = input;
                let mut minus = input;
                plus[k] += h;
                minus[k] -= h;
                let fd = (m.predict_batch(&plus)[0] - m.predict_batch(&minus)[0]) / (2.0 * h);
                let rel = (grad[k] - fd).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
                assert!(rel < 1e-5 || (grad[k] - fd).abs() < 1e-9, "k={k}: {} vs {fd}", grad[k]);
            }
            probes += 1;
        }
    }

    #[test]
    fn weight_norm_is_scale_invariant() {
        let mut r = rng(8);
        let mut m = MlpModel::new(&[10, 10], 0.0, 0.1, &mut r);
        let inputs: Vec<f64> = (0..5 * 20).map(|_| r.gen_range(-1.0..1.0)).collect();
        let before = m.predict_batch(&inputs);
        let s = m.shapes()[1];
        let row = s.v().start + 3 * s.inputs;
        for v in &mut m.params[row..row + s.inputs] {
            *v *= 7.25;
        }
        let after = m.predict_batch(&inputs);
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn dropout_expectation_matches_eval() {
        let mut r = rng(9);
        let m = MlpModel::new(&[16], 0.5, 0.1, &mut r);
        let input = [0.3, -0.4, 0.2, 0.1, -0.6];
        let eval = m.predict_batch(&input)[0];
        let n = 10_000;
        let draws: Vec<f64> = (0..n).map(|_| m.forward_batch(&input, Mode::Train, &mut r)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sigma = (var / n as f64).sqrt();
        // With one hidden layer the output is linear in the mask, so the
        // eval output is the exact expectation.
        assert!((mean - eval).abs() <= 3.0 * sigma, "mean {mean} eval {eval} sigma {sigma}");
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            MlpModel::from_params(vec![4, 1], vec![0.0; 6], 0.0, 0.1),
            Err(DdfError::ShapeMismatch(_))
        ));
        assert!(matches!(
            MlpModel::from_params(vec![5, 1], vec![1.0; 3], 0.0, 0.1),
            Err(DdfError::ShapeMismatch(_))
        ));
    }
}

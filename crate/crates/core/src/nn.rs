//! Minimal dense networks: forward pass, analytic backprop for an MSE loss,
//! and a bias-corrected Adam optimizer.
//!
//! Weights are stored row-major as `outputs × inputs`, so the forward pass is
//! a sequence of dot products and the input gradient is a sequence of axpys.
//! All arithmetic is `f64`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Identity => z,
        }
    }
}

/// One affine layer followed by an activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Row-major `outputs × inputs`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.inputs + inp]
    }

    fn row(&self, out: usize) -> &[f64] {
        &self.weights[out * self.inputs..(out + 1) * self.inputs]
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        // One-hot style inputs (at most two non-zeros) skip the full dot
        // product; the result is the same sum, up to the sign of zero.
        if let Some(nz) = sparse_support(input) {
            let n_in = self.inputs;
            out.extend(self.biases.iter().enumerate().map(|(j, &b)| {
                let w = &self.weights[j * n_in..(j + 1) * n_in];
                let s = match nz {
                    [None, _] => 0.0,
                    [Some(a), None] => input[a] * w[a],
                    [Some(a), Some(c)] => input[a] * w[a] + input[c] * w[c],
                };
                self.activation.apply(b + s)
            }));
            return;
        }
        out.extend(self.biases.iter().enumerate().map(|(j, &b)| self.activation.apply(b + dot(self.row(j), input))));
    }
}

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Identifies one scalar parameter of a [`DenseNet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamIndex {
    Weight { layer: usize, out: usize, inp: usize },
    Bias { layer: usize, out: usize },
}

fn validate_shape(sizes: &[usize], activations: &[Activation]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Config(format!("a network needs at least one layer (got {} sizes)", sizes.len())));
    }
    if sizes.contains(&0) {
        return Err(Error::Config("layer sizes must be positive".into()));
    }
    if activations.len() != sizes.len() - 1 {
        return Err(Error::Config(format!(
            "{} layers need {} activations, got {}",
            sizes.len() - 1,
            sizes.len() - 1,
            activations.len()
        )));
    }
    Ok(())
}

impl DenseNet {
    /// Glorot-uniform weights, zero biases. `sizes` lists every layer width
    /// including the input, so `[60, 1024, 200]` is a two-layer net.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        validate_shape(sizes, activations)?;
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| {
                let (inputs, outputs) = (pair[0], pair[1]);
                let bound = (6.0 / (inputs + outputs) as f64).sqrt();
                let weights = (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect();
                Layer { inputs, outputs, weights, biases: vec![0.0; outputs], activation }
            })
            .collect();
        Ok(Self { layers })
    }

    /// All parameters zero.
    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        validate_shape(sizes, activations)?;
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| Layer {
                inputs: pair[0],
                outputs: pair[1],
                weights: vec![0.0; pair[0] * pair[1]],
                biases: vec![0.0; pair[1]],
                activation,
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for layer in &self.layers {
            for x in layer.weights.iter().chain(&layer.biases) {
                for byte in x.to_bits().to_le_bytes() {
                    hash ^= u64::from(byte);
                    hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        hash
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|x| x.is_finite()))
    }

    pub fn param(&self, idx: ParamIndex) -> f64 {
        match idx {
            ParamIndex::Weight { layer, out, inp } => self.layers[layer].weight(out, inp),
            ParamIndex::Bias { layer, out } => self.layers[layer].biases[out],
        }
    }

    fn param_mut(&mut self, idx: ParamIndex) -> &mut f64 {
        match idx {
            ParamIndex::Weight { layer, out, inp } => {
                let l = &mut self.layers[layer];
                &mut l.weights[out * l.inputs + inp]
            }
            ParamIndex::Bias { layer, out } => &mut self.layers[layer].biases[out],
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("net input", self.input_dim(), input.len())?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass over a batch of inputs. Dense layers go through a
    /// blocked matrix product, so results agree with [`forward`] only up to
    /// rounding.
    ///
    /// [`forward`]: DenseNet::forward
    pub fn forward_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        for x in inputs {
            check_len("net input", self.input_dim(), x.len())?;
        }
        let rows = inputs.len();
        let mut cur: Vec<f64> = inputs.concat();
        let mut width = self.input_dim();
        let mut scratch = Vec::new();
        for layer in &self.layers {
            let n = layer.outputs;
            let sparse = cur.chunks(width).all(|x| sparse_support(x).is_some());
            let mut next = Vec::with_capacity(rows * n);
            if sparse || rows == 0 {
                for x in cur.chunks(width) {
                    layer.forward_into(x, &mut scratch);
                    next.extend_from_slice(&scratch);
                }
            } else {
                next.resize(rows * n, 0.0);
                // SAFETY: every slice holds exactly the extent implied by
                // its dimensions and strides: `cur` is rows×width row-major,
                // the weights are n×width row-major (read transposed) and
                // `next` is rows×n row-major.
                unsafe {
                    matrixmultiply::dgemm(
                        rows,
                        width,
                        n,
                        1.0,
                        cur.as_ptr(),
                        width as isize,
                        1,
                        layer.weights.as_ptr(),
                        1,
                        width as isize,
                        0.0,
                        next.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
                for row in next.chunks_mut(n) {
                    for (y, &b) in row.iter_mut().zip(&layer.biases) {
                        *y = layer.activation.apply(*y + b);
                    }
                }
            }
            cur = next;
            width = n;
        }
        Ok(cur.chunks(width.max(1)).map(<[f64]>::to_vec).collect())
    }

    /// Activations of every layer; `acts[0]` is the input, `acts[k + 1]` the
    /// post-activation output of layer `k`.
    fn forward_trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward_into(acts.last().unwrap(), &mut out);
            acts.push(out);
        }
        acts
    }

    /// Mean squared error over output dimensions.
    pub fn loss(&self, input: &[f64], target: &[f64]) -> Result<f64> {
        check_len("net target", self.output_dim(), target.len())?;
        let out = self.forward(input)?;
        Ok(mse(&out, target))
    }

    fn check_io(&self, input: &[f64], target: &[f64]) -> Result<()> {
        check_len("net input", self.input_dim(), input.len())?;
        check_len("net target", self.output_dim(), target.len())
    }

    /// Loss and analytic gradient of the MSE loss w.r.t. every parameter.
    pub fn gradients(&self, input: &[f64], target: &[f64]) -> Result<(f64, Gradients)> {
        self.check_io(input, target)?;
        let acts = self.forward_trace(input);
        let (loss, mut delta) = loss_and_delta(acts.last().unwrap(), target)?;
        let mut grads = Gradients::zeros_like(self);
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            mask_activation(layer.activation, &acts[k + 1], &mut delta);
            let x = &acts[k];
            let g = &mut grads.layers[k];
            let mut dx = vec![0.0; if k > 0 { layer.inputs } else { 0 }];
            for (j, &d) in delta.iter().enumerate() {
                let gw = &mut g.weights[j * layer.inputs..(j + 1) * layer.inputs];
                for (gi, &xi) in gw.iter_mut().zip(x) {
                    *gi = d * xi;
                }
                if k > 0 && d != 0.0 {
                    axpy(&mut dx, d, layer.row(j));
                }
            }
            g.biases.copy_from_slice(&delta);
            delta = dx;
        }
        Ok((loss, grads))
    }

    /// One MSE gradient step with Adam. Returns the loss before the update.
    ///
    /// Backprop and the optimizer update are fused row by row so the weight
    /// gradient is never materialized; the result is bitwise identical to
    /// `gradients` followed by [`AdamState::apply`].
    pub fn train_step(&mut self, adam: &mut AdamState, input: &[f64], target: &[f64]) -> Result<f64> {
        self.train_step_with_output(adam, input, target).map(|(loss, _)| loss)
    }

    /// Like [`DenseNet::train_step`], also returning the pre-update output.
    pub fn train_step_with_output(
        &mut self,
        adam: &mut AdamState,
        input: &[f64],
        target: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        self.check_io(input, target)?;
        adam.check_shape(self)?;
        let mut acts = self.forward_trace(input);
        let (loss, mut delta) = loss_and_delta(acts.last().unwrap(), target)?;
        let coeffs = adam.advance();
        for k in (0..self.layers.len()).rev() {
            let layer = &mut self.layers[k];
            let moments = &mut adam.moments[k];
            mask_activation(layer.activation, &acts[k + 1], &mut delta);
            let x = &acts[k];
            let n_in = layer.inputs;
            let mut dx = vec![0.0; if k > 0 { n_in } else { 0 }];
            for (j, &d) in delta.iter().enumerate() {
                let span = j * n_in..(j + 1) * n_in;
                let row = &mut layer.weights[span.clone()];
                if k > 0 && d != 0.0 {
                    axpy(&mut dx, d, row);
                }
                coeffs.update(row, &mut moments.m.weights[span.clone()], &mut moments.v.weights[span], d, x);
            }
            coeffs.update(&mut layer.biases, &mut moments.m.biases, &mut moments.v.biases, 1.0, &delta);
            delta = dx;
        }
        Ok((loss, acts.pop().unwrap()))
    }
}

/// Parameter-shaped buffer: one entry per weight and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads { weights: vec![0.0; l.weights.len()], biases: vec![0.0; l.biases.len()] })
                .collect(),
        }
    }

    pub fn get(&self, idx: ParamIndex) -> f64 {
        match idx {
            ParamIndex::Weight { layer, out, inp } => {
                let inputs = self.layers[layer].weights.len() / self.layers[layer].biases.len();
                self.layers[layer].weights[out * inputs + inp]
            }
            ParamIndex::Bias { layer, out } => self.layers[layer].biases[out],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    fn same_shape(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Moments {
    m: LayerGrads,
    v: LayerGrads,
}

/// Per-parameter Adam moments for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    config: AdamConfig,
    moments: Vec<Moments>,
    step_count: u64,
    beta1_pow: f64,
    beta2_pow: f64,
}

/// Per-step constants of the bias-corrected update.
/// Moments of parameters that stop receiving gradient decay geometrically
/// into the subnormal range, where x86 arithmetic is two orders of magnitude
/// slower. They are cut to zero there instead.
#[inline(always)]
fn flush_subnormal(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}

struct AdamCoeffs {
    beta1: f64,
    beta2: f64,
    one_minus_beta1: f64,
    one_minus_beta2: f64,
    step_size: f64,
    inv_sqrt_bc2: f64,
    eps: f64,
}

impl AdamCoeffs {
    /// Updates `params` with gradient `scale * xs[i]`.
    #[inline]
    fn update(&self, params: &mut [f64], m: &mut [f64], v: &mut [f64], scale: f64, xs: &[f64]) {
        let n = params.len();
        let (m, v, xs) = (&mut m[..n], &mut v[..n], &xs[..n]);
        for i in 0..n {
            let g = scale * xs[i];
            let mi = flush_subnormal(self.beta1 * m[i] + self.one_minus_beta1 * g);
            let vi = flush_subnormal(self.beta2 * v[i] + self.one_minus_beta2 * (g * g));
            m[i] = mi;
            v[i] = vi;
            params[i] -= self.step_size * mi / (vi.sqrt() * self.inv_sqrt_bc2 + self.eps);
        }
    }
}

impl AdamState {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        let zeros = Gradients::zeros_like(net);
        Self {
            config,
            moments: zeros.layers.into_iter().map(|g| Moments { m: g.clone(), v: g }).collect(),
            step_count: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Second-moment accumulators, flattened in parameter order.
    pub fn second_moments(&self) -> impl Iterator<Item = f64> + '_ {
        self.moments.iter().flat_map(|mo| mo.v.weights.iter().chain(&mo.v.biases).copied())
    }

    fn check_shape(&self, net: &DenseNet) -> Result<()> {
        let ok = self.moments.len() == net.layers.len()
            && self
                .moments
                .iter()
                .zip(&net.layers)
                .all(|(mo, l)| mo.m.weights.len() == l.weights.len() && mo.m.biases.len() == l.biases.len());
        if ok {
            Ok(())
        } else {
            Err(Error::Config("optimizer state does not match network".into()))
        }
    }

    fn advance(&mut self) -> AdamCoeffs {
        let c = self.config;
        self.step_count += 1;
        self.beta1_pow *= c.beta1;
        self.beta2_pow *= c.beta2;
        AdamCoeffs {
            beta1: c.beta1,
            beta2: c.beta2,
            one_minus_beta1: 1.0 - c.beta1,
            one_minus_beta2: 1.0 - c.beta2,
            step_size: c.lr / (1.0 - self.beta1_pow),
            inv_sqrt_bc2: 1.0 / (1.0 - self.beta2_pow).sqrt(),
            eps: c.eps,
        }
    }

    /// Applies one update with precomputed gradients.
    pub fn apply(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        self.check_shape(net)?;
        if !grads.same_shape(net) {
            return Err(Error::Config("gradients do not match network".into()));
        }
        if !grads.iter().all(f64::is_finite) {
            return Err(Error::Numerical("non-finite gradient".into()));
        }
        let coeffs = self.advance();
        for ((layer, mo), g) in net.layers.iter_mut().zip(&mut self.moments).zip(&grads.layers) {
            let n_in = layer.inputs;
            for j in 0..layer.outputs {
                let span = j * n_in..(j + 1) * n_in;
                coeffs.update(
                    &mut layer.weights[span.clone()],
                    &mut mo.m.weights[span.clone()],
                    &mut mo.v.weights[span.clone()],
                    1.0,
                    &g.weights[span],
                );
            }
            coeffs.update(&mut layer.biases, &mut mo.m.biases, &mut mo.v.biases, 1.0, &g.biases);
        }
        Ok(())
    }
}

/// Central-difference gradient of the MSE loss w.r.t. a single parameter.
///
/// The loss difference is accumulated as `Σ (o⁺ − o⁻)(o⁺ + o⁻ − 2t) / n`,
/// which is algebraically `L⁺ − L⁻` with less cancellation.
pub fn finite_diff_param(net: &mut DenseNet, input: &[f64], target: &[f64], h: f64, idx: ParamIndex) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Contract(format!("finite-difference step must be > 0, got {h}")));
    }
    net.check_io(input, target)?;
    let original = net.param(idx);
    *net.param_mut(idx) = original + h;
    let plus = net.forward(input)?;
    *net.param_mut(idx) = original - h;
    let minus = net.forward(input)?;
    *net.param_mut(idx) = original;
    let n = target.len() as f64;
    let diff: f64 = plus.iter().zip(&minus).zip(target).map(|((p, m), t)| (p - m) * (p + m - 2.0 * t)).sum();
    Ok(diff / n / (2.0 * h))
}

/// Central-difference gradient for every parameter. O(params²); meant as a
/// test oracle for [`DenseNet::gradients`].
pub fn finite_diff_grads(net: &DenseNet, input: &[f64], target: &[f64], h: f64) -> Result<Gradients> {
    let mut probe = net.clone();
    let mut grads = Gradients::zeros_like(net);
    for (k, layer) in net.layers.iter().enumerate() {
        for out in 0..layer.outputs {
            for inp in 0..layer.inputs {
                let idx = ParamIndex::Weight { layer: k, out, inp };
                grads.layers[k].weights[out * layer.inputs + inp] =
                    finite_diff_param(&mut probe, input, target, h, idx)?;
            }
            let idx = ParamIndex::Bias { layer: k, out };
            grads.layers[k].biases[out] = finite_diff_param(&mut probe, input, target, h, idx)?;
        }
    }
    Ok(grads)
}

pub fn mse(output: &[f64], target: &[f64]) -> f64 {
    let sum: f64 = output.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum();
    sum / output.len() as f64
}

fn loss_and_delta(output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = mse(output, target);
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {loss}")));
    }
    let scale = 2.0 / output.len() as f64;
    let delta = output.iter().zip(target).map(|(o, t)| scale * (o - t)).collect();
    Ok((loss, delta))
}

fn mask_activation(activation: Activation, post: &[f64], delta: &mut [f64]) {
    if activation == Activation::Relu {
        for (d, &a) in delta.iter_mut().zip(post) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
    }
}

/// Positions of the non-zero entries when there are at most two of them.
fn sparse_support(x: &[f64]) -> Option<[Option<usize>; 2]> {
    let mut found = [None, None];
    let mut n = 0;
    for (i, &v) in x.iter().enumerate() {
        if v != 0.0 {
            if n == 2 {
                return None;
            }
            found[n] = Some(i);
            n += 1;
        }
    }
    Some(found)
}

const LANES: usize = 32;

/// Dot product with independent accumulators so the compiler can keep
/// several SIMD registers busy. The summation order is fixed.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; LANES];
    let chunks = n / LANES;
    for c in 0..chunks {
        let xa = &a[c * LANES..(c + 1) * LANES];
        let xb = &b[c * LANES..(c + 1) * LANES];
        for k in 0..LANES {
            acc[k] += xa[k] * xb[k];
        }
    }
    let mut tail = 0.0;
    for i in chunks * LANES..n {
        tail += a[i] * b[i];
    }
    let mut width = LANES;
    while width > 1 {
        width /= 2;
        for k in 0..width {
            acc[k] += acc[k + width];
        }
    }
    acc[0] + tail
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

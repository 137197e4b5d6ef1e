//! Dense networks with hand-written reverse-mode gradients and Adam.
//!
//! Parameters of a network live in one flat vector, layer by layer, weights
//! then biases. Weights of a layer are stored row-major as an
//! `input_dim x output_dim` matrix so the forward pass is a sequence of
//! contiguous axpy updates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math;
use crate::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Tanh => math::tanh(x),
            Activation::Identity => x,
        }
    }

    /// Derivative given both the pre-activation and the activation output.
    #[inline]
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if pre > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - post * post,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "leaky_relu" => Some(Activation::LeakyRelu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Shape and activations of a fully connected network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    /// Only `Identity` and `Tanh` are accepted here.
    pub output_activation: Activation,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        let spec = MlpSpec {
            input_dim,
            hidden: hidden.to_vec(),
            output_dim,
            activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("network dimensions must be positive".into()));
        }
        if self.hidden.is_empty() {
            return Err(Error::Config("network needs at least one hidden layer".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if !matches!(
            self.output_activation,
            Activation::Identity | Activation::Tanh
        ) {
            return Err(Error::Config(format!(
                "output activation must be identity or tanh, got {}",
                self.output_activation.name()
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment estimates for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// One bias-corrected Adam update of `params` using `grads`.
    ///
    /// Nothing is modified if any gradient is non-finite.
    pub fn update(&mut self, cfg: &AdamConfig, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if let Some((index, &value)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index, value });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= cfg.lr * m_hat / (math::sqrt(v_hat) + cfg.eps);
        }
        Ok(())
    }
}

/// All trainable parameters of one network plus their gradients and Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTree {
    shapes: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    values: Vec<f64>,
    grads: Vec<f64>,
    adam: AdamState,
}

impl ParamTree {
    pub fn zeros(shapes: &[(usize, usize)]) -> Self {
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut n = 0;
        for &(i, o) in shapes {
            offsets.push(n);
            n += i * o + o;
        }
        ParamTree {
            shapes: shapes.to_vec(),
            offsets,
            values: vec![0.0; n],
            grads: vec![0.0; n],
            adam: AdamState::new(n),
        }
    }

    /// Uniform `+-sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn glorot(shapes: &[(usize, usize)], rng: &mut impl Rng) -> Self {
        let mut tree = Self::zeros(shapes);
        for l in 0..shapes.len() {
            let (i, o) = shapes[l];
            let bound = math::sqrt(6.0 / (i + o) as f64);
            let off = tree.offsets[l];
            for w in &mut tree.values[off..off + i * o] {
                *w = crate::rng::uniform(rng, -bound, bound);
            }
        }
        tree
    }

    pub fn shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [f64] {
        &mut self.grads
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn adam_mut(&mut self) -> &mut AdamState {
        &mut self.adam
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let (i, o) = self.shapes[layer];
        let off = self.offsets[layer];
        &self.values[off..off + i * o]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        let (i, o) = self.shapes[layer];
        let off = self.offsets[layer] + i * o;
        &self.values[off..off + o]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let (i, o) = self.shapes[layer];
        let off = self.offsets[layer];
        &mut self.values[off..off + i * o]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        let (i, o) = self.shapes[layer];
        let off = self.offsets[layer] + i * o;
        &mut self.values[off..off + o]
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Adam step on the accumulated gradients, then zero them.
    ///
    /// On a non-finite gradient the parameters are left untouched and the
    /// gradients are kept for inspection.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        self.adam.update(cfg, &mut self.values, &self.grads)?;
        self.zero_grad();
        Ok(())
    }

    /// Polyak average: `self <- tau * source + (1 - tau) * self`.
    pub fn polyak_from(&mut self, source: &ParamTree, tau: f64) {
        debug_assert_eq!(self.shapes, source.shapes);
        for (t, &s) in self.values.iter_mut().zip(&source.values) {
            *t = tau * s + (1.0 - tau) * *t;
        }
    }

    /// Replace the parameter values (not the optimizer state).
    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                self.values.len(),
                values.len()
            )));
        }
        self.values.copy_from_slice(values);
        Ok(())
    }

    /// Restore optimizer moments, e.g. from a checkpoint.
    pub fn set_adam(&mut self, adam: AdamState) -> Result<()> {
        if adam.m.len() != self.values.len() || adam.v.len() != self.values.len() {
            return Err(Error::Config("adam state does not match parameter count".into()));
        }
        self.adam = adam;
        Ok(())
    }
}

/// Activations recorded by a batched forward pass, consumed by backward.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    batch: usize,
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network output, `batch x output_dim` row-major.
    pub fn output(&self) -> &[f64] {
        self.post.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn is_recorded(&self) -> bool {
        !self.post.is_empty()
    }
}

/// A multi-layer perceptron: its shape plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: ParamTree,
}

impl Mlp {
    pub fn new(spec: MlpSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let params = ParamTree::glorot(&spec.layer_shapes(), rng);
        Ok(Mlp { spec, params })
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let params = ParamTree::zeros(&spec.layer_shapes());
        Ok(Mlp { spec, params })
    }

    pub fn from_parts(spec: MlpSpec, params: ParamTree) -> Result<Self> {
        spec.validate()?;
        if params.shapes() != spec.layer_shapes().as_slice() {
            return Err(Error::Config("parameter shapes do not match network spec".into()));
        }
        Ok(Mlp { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamTree {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamTree {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.params.shapes.len() {
            self.spec.output_activation
        } else {
            self.spec.activation
        }
    }

    /// Forward a single input without recording a trace.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.input_dim {
            return Err(Error::Config(format!(
                "network input has length {}, expected {}",
                x.len(),
                self.spec.input_dim
            )));
        }
        let mut cur = x.to_vec();
        for l in 0..self.params.shapes.len() {
            let (fan_in, fan_out) = self.params.shapes[l];
            let mut out = self.params.biases(l).to_vec();
            let w = self.params.weights(l);
            for (i, &xi) in cur.iter().enumerate().take(fan_in) {
                let row = &w[i * fan_out..(i + 1) * fan_out];
                for (o, &wv) in out.iter_mut().zip(row) {
                    *o += xi * wv;
                }
            }
            let act = self.activation_of(l);
            out.iter_mut().for_each(|v| *v = act.apply(*v));
            cur = out;
        }
        Ok(cur)
    }

    /// Forward `batch` inputs stored row-major in `x`, recording into `trace`.
    pub fn forward_batch(&self, x: &[f64], batch: usize, trace: &mut Trace) -> Result<()> {
        if batch == 0 || x.len() != batch * self.spec.input_dim {
            return Err(Error::Config(format!(
                "batch input has length {}, expected {} x {}",
                x.len(),
                batch,
                self.spec.input_dim
            )));
        }
        let n_layers = self.params.shapes.len();
        trace.batch = batch;
        trace.input.clear();
        trace.input.extend_from_slice(x);
        trace.pre.resize_with(n_layers, Vec::new);
        trace.post.resize_with(n_layers, Vec::new);
        for l in 0..n_layers {
            let (fan_in, fan_out) = self.params.shapes[l];
            let w = self.params.weights(l);
            let b = self.params.biases(l);
            let (before, rest) = trace.post.split_at_mut(l);
            let input: &[f64] = if l == 0 { &trace.input } else { &before[l - 1] };
            let pre = &mut trace.pre[l];
            pre.clear();
            pre.resize(batch * fan_out, 0.0);
            for n in 0..batch {
                let xr = &input[n * fan_in..(n + 1) * fan_in];
                let out = &mut pre[n * fan_out..(n + 1) * fan_out];
                out.copy_from_slice(b);
                for (i, &xi) in xr.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let row = &w[i * fan_out..(i + 1) * fan_out];
                    for (o, &wv) in out.iter_mut().zip(row) {
                        *o += xi * wv;
                    }
                }
            }
            let act = self.activation_of(l);
            let post = &mut rest[0];
            post.clear();
            post.extend(pre.iter().map(|&v| act.apply(v)));
        }
        Ok(())
    }

    /// Backpropagate `upstream` (d loss / d output, `batch x output_dim`)
    /// through the recorded pass. Parameter gradients are accumulated into
    /// the network's gradient buffer; the input gradient is returned.
    pub fn backward(&mut self, trace: &Trace, upstream: &[f64]) -> Result<Vec<f64>> {
        let spec = &self.spec;
        let params = &mut self.params;
        backward_impl(
            spec,
            &params.shapes,
            &params.offsets,
            &params.values,
            Some(&mut params.grads),
            trace,
            upstream,
            true,
        )
    }

    /// Accumulate parameter gradients only; skips the input gradient.
    pub fn backward_params(&mut self, trace: &Trace, upstream: &[f64]) -> Result<()> {
        let spec = &self.spec;
        let params = &mut self.params;
        backward_impl(
            spec,
            &params.shapes,
            &params.offsets,
            &params.values,
            Some(&mut params.grads),
            trace,
            upstream,
            false,
        )
        .map(|_| ())
    }

    /// Like [`Mlp::backward`] but only computes the input gradient.
    pub fn input_gradient(&self, trace: &Trace, upstream: &[f64]) -> Result<Vec<f64>> {
        backward_impl(
            &self.spec,
            &self.params.shapes,
            &self.params.offsets,
            &self.params.values,
            None,
            trace,
            upstream,
            true,
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_impl(
    spec: &MlpSpec,
    shapes: &[(usize, usize)],
    offsets: &[usize],
    values: &[f64],
    mut grads: Option<&mut Vec<f64>>,
    trace: &Trace,
    upstream: &[f64],
    want_input_grad: bool,
) -> Result<Vec<f64>> {
    if !trace.is_recorded() {
        return Err(Error::State("backward called without a recorded forward pass".into()));
    }
    let batch = trace.batch;
    let n_layers = shapes.len();
    if trace.post.len() != n_layers || trace.input.len() != batch * spec.input_dim {
        return Err(Error::State("trace was recorded by a different network".into()));
    }
    if upstream.len() != batch * spec.output_dim {
        return Err(Error::Config(format!(
            "upstream gradient has length {}, expected {} x {}",
            upstream.len(),
            batch,
            spec.output_dim
        )));
    }
    let mut delta = upstream.to_vec();
    for l in (0..n_layers).rev() {
        let (fan_in, fan_out) = shapes[l];
        let act = if l + 1 == n_layers {
            spec.output_activation
        } else {
            spec.activation
        };
        let pre = &trace.pre[l];
        let post = &trace.post[l];
        for ((d, &p), &q) in delta.iter_mut().zip(pre).zip(post) {
            *d *= act.derivative(p, q);
        }
        let input: &[f64] = if l == 0 { &trace.input } else { &trace.post[l - 1] };
        let off = offsets[l];
        let w = &values[off..off + fan_in * fan_out];
        if let Some(g) = grads.as_deref_mut() {
            let (gw, gb) = g[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            for n in 0..batch {
                let dr = &delta[n * fan_out..(n + 1) * fan_out];
                for (b, &d) in gb.iter_mut().zip(dr) {
                    *b += d;
                }
                let xr = &input[n * fan_in..(n + 1) * fan_in];
                for (i, &xi) in xr.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let grow = &mut gw[i * fan_out..(i + 1) * fan_out];
                    for (gv, &d) in grow.iter_mut().zip(dr) {
                        *gv += xi * d;
                    }
                }
            }
        }
        if l == 0 && !want_input_grad {
            return Ok(Vec::new());
        }
        let mut next = vec![0.0; batch * fan_in];
        for n in 0..batch {
            let dr = &delta[n * fan_out..(n + 1) * fan_out];
            let nr = &mut next[n * fan_in..(n + 1) * fan_in];
            for (i, v) in nr.iter_mut().enumerate() {
                *v = math::dot(&w[i * fan_out..(i + 1) * fan_out], dr);
            }
        }
        delta = next;
    }
    Ok(delta)
}

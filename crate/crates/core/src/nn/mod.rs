//! Dense networks with hand-written backpropagation, softmax heads and the
//! Adam optimizer. Everything is `f64`.
//!
//! A network is a [`MlpLayout`] (shape only) plus a flat parameter vector.
//! Layer `l` stores an `out × in` row-major weight block followed by `out`
//! biases. Hidden layers use a rectifier (subgradient 0 at exactly 0); the
//! output layer uses the layout's output activation.

mod checkpoint;
mod optim;

pub use checkpoint::{Checkpoint, NetworkRecord, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use optim::{clip_global_norm, AdamConfig, AdamState, Direction, Optimizer};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpLayout {
    sizes: Vec<usize>,
    output: Activation,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// `inputs[l]` is the input of layer `l`; the last entry is the output.
    values: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    version: Option<u64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("forward cache has at least the input")
    }

    /// Pre-activations of every layer.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }

    pub fn input(&self) -> &[f64] {
        &self.values[0]
    }
}

impl MlpLayout {
    /// `sizes` lists every layer width including input and output.
    pub fn new(sizes: &[usize], output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            output,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output
        } else {
            Activation::Relu
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.param_count());
        for w in self.sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        params
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape("mlp parameters", self.param_count(), params.len()));
        }
        Ok(())
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<ForwardCache> {
        self.check_params(params)?;
        if input.len() != self.input_dim() {
            return Err(Error::shape("mlp input", self.input_dim(), input.len()));
        }
        let mut values = Vec::with_capacity(self.sizes.len());
        let mut pre = Vec::with_capacity(self.num_layers());
        values.push(input.to_vec());
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[offset..offset + n_in * n_out];
            let bias = &params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            offset += (n_in + 1) * n_out;
            let x = values.last().unwrap();
            let z: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(bias)
                .map(|(row, b)| b + dot(row, x))
                .collect();
            let act = self.activation(l);
            values.push(z.iter().map(|&v| act.apply(v)).collect());
            pre.push(z);
        }
        Ok(ForwardCache {
            values,
            pre,
            version: None,
        })
    }

    /// Reverse-mode pass. Adds the parameter gradient into `grad_params` and
    /// returns the gradient with respect to the input.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &ForwardCache,
        grad_output: &[f64],
        grad_params: &mut [f64],
    ) -> Result<Vec<f64>> {
        self.check_params(params)?;
        if grad_params.len() != params.len() {
            return Err(Error::shape("mlp gradient buffer", params.len(), grad_params.len()));
        }
        if cache.values.len() != self.sizes.len() || cache.values.iter().zip(&self.sizes).any(|(v, &n)| v.len() != n) {
            return Err(Error::StaleCache("forward cache does not match this layout"));
        }
        if grad_output.len() != self.output_dim() {
            return Err(Error::shape(
                "mlp output gradient",
                self.output_dim(),
                grad_output.len(),
            ));
        }
        let mut offsets: Vec<usize> = self
            .sizes
            .windows(2)
            .scan(0, |acc, w| {
                let start = *acc;
                *acc += (w[0] + 1) * w[1];
                Some(start)
            })
            .collect();
        let mut grad = grad_output.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = offsets.pop().unwrap();
            let act = self.activation(l);
            for (g, &z) in grad.iter_mut().zip(&cache.pre[l]) {
                *g *= act.derivative(z);
            }
            let x = &cache.values[l];
            let weights = &params[offset..offset + n_in * n_out];
            let (gw, gb) = grad_params[offset..offset + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
            let mut grad_in = vec![0.0; n_in];
            for (o, &g) in grad.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                let row = &weights[o * n_in..(o + 1) * n_in];
                let grow = &mut gw[o * n_in..(o + 1) * n_in];
                for ((gw_i, gi), (&xi, &wi)) in grow.iter_mut().zip(grad_in.iter_mut()).zip(x.iter().zip(row)) {
                    *gw_i += g * xi;
                    *gi += g * wi;
                }
            }
            grad = grad_in;
        }
        Ok(grad)
    }
}

/// Dot product with four running sums so the compiler can vectorize it.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// A layout together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layout: MlpLayout,
    params: Vec<f64>,
    version: u64,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: Activation, rng: &mut R) -> Result<Self> {
        let layout = MlpLayout::new(sizes, output)?;
        let params = layout.init(rng);
        Ok(Self {
            layout,
            params,
            version: 0,
        })
    }

    pub fn from_params(layout: MlpLayout, params: Vec<f64>) -> Result<Self> {
        layout.check_params(&params)?;
        Ok(Self {
            layout,
            params,
            version: 0,
        })
    }

    pub fn layout(&self) -> &MlpLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access. Invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardCache> {
        let mut cache = self.layout.forward(&self.params, input)?;
        cache.version = Some(self.version);
        Ok(cache)
    }

    /// Output only, no cache kept.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.layout.forward(&self.params, input)?;
        Ok(cache.values.pop().unwrap())
    }

    /// Returns `(parameter gradient, input gradient)`.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let input_grad = self.backward_into(cache, grad_output, &mut grad)?;
        Ok((grad, input_grad))
    }

    pub fn backward_into(&self, cache: &ForwardCache, grad_output: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        if cache.version != Some(self.version) {
            return Err(Error::StaleCache("parameters changed since the forward pass"));
        }
        self.layout.backward(&self.params, cache, grad_output, grad)
    }

    pub fn to_record(&self, name: &str) -> NetworkRecord {
        NetworkRecord {
            name: name.to_owned(),
            layout: self.layout.clone(),
            params: self.params.clone(),
        }
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&x| x - lse).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        )
        .0
}

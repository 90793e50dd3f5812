//! Fully-connected regression network with a Gaussian output head.
//!
//! The last layer emits `(raw_mean, raw_var)`; the predictive variance is
//! `softplus(raw_var) + VAR_FLOOR`. Training minimizes the Gaussian negative
//! log-likelihood without its additive constant:
//!
//! ```text
//! nll = ln(var) / 2 + (y - mean)^2 / (2 var)
//! ```
//!
//! Gradients are derived by hand for the ReLU MLP family only.

mod adam;
mod io;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{AdamConfig, AdamState};
pub use io::{read_member, write_member, MEMBER_MAGIC, MEMBER_VERSION};

use crate::error::{Error, Result};

/// Lower bound added to every predicted variance.
pub const VAR_FLOOR: f64 = 1e-6;

pub const DEFAULT_HIDDEN: [usize; 4] = [64, 64, 32, 16];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrediction {
    pub mean: f64,
    pub var: f64,
}

impl GaussianPrediction {
    pub fn std(&self) -> f64 {
        self.var.sqrt()
    }
}

/// `ln(1 + e^z)` without overflow for large `z`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gaussian negative log-likelihood, constant term dropped.
pub fn nll(pred: &GaussianPrediction, y: f64) -> f64 {
    let r = y - pred.mean;
    0.5 * pred.var.ln() + r * r / (2.0 * pred.var)
}

/// A dense layer; `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b),
        );
    }
}

/// Parameters of one member network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<Dense>,
    pub seed: u64,
}

/// Gradient with the same layout as [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }
}

/// Forward-pass intermediates for one input.
struct Trace {
    /// inputs to every layer; `acts[0]` is the network input
    acts: Vec<Vec<f64>>,
    /// pre-activations of every layer, including the output
    pre: Vec<Vec<f64>>,
}

impl Trace {
    fn output(&self) -> (f64, f64) {
        let o = self.pre.last().expect("output layer");
        (o[0], o[1])
    }

    fn prediction(&self) -> GaussianPrediction {
        let (m, raw) = self.output();
        GaussianPrediction {
            mean: m,
            var: softplus(raw) + VAR_FLOOR,
        }
    }
}

impl NetworkParams {
    /// Uniform `±sqrt(6 / fan_in)` weights and zero biases, deterministic in
    /// `seed`. `hidden` lists hidden widths; the output layer has width 2.
    pub fn init(d: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if d == 0 || hidden.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "bad architecture d={d} hidden={hidden:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths: Vec<usize> = std::iter::once(d)
            .chain(hidden.iter().copied())
            .chain([2])
            .collect();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = (6.0 / inputs as f64).sqrt();
                Dense {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs)
                        .map(|_| rng.random_range(-bound..bound))
                        .collect(),
                    bias: vec![0.0; outputs],
                }
            })
            .collect();
        Ok(NetworkParams { layers, seed })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.outputs)
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.tensors().map(<[f64]>::len).sum()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    /// Checks that layer shapes chain from the input to a width-2 output and
    /// every parameter is finite.
    pub fn validate(&self) -> Result<()> {
        let chained = self.layers.windows(2).all(|w| w[0].outputs == w[1].inputs);
        let shaped = self
            .layers
            .iter()
            .all(|l| l.weights.len() == l.inputs * l.outputs && l.bias.len() == l.outputs);
        let last_ok = self.layers.last().is_some_and(|l| l.outputs == 2);
        if !(chained && shaped && last_ok) {
            return Err(Error::ModelFormat(
                "layer shapes do not chain to a 2-wide output".into(),
            ));
        }
        if self.tensors().flatten().any(|v| !v.is_finite()) {
            return Err(Error::ModelFormat("non-finite parameter".into()));
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let n = self.layers.len();
        let mut acts = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        acts.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.affine(acts.last().unwrap(), &mut z);
            if i + 1 < n {
                acts.push(z.iter().map(|v| v.max(0.0)).collect());
            }
            pre.push(z);
        }
        Trace { acts, pre }
    }

    /// Which hidden units are active for `x`, layer by layer. Finite
    /// difference checks use it to spot perturbations that cross a kink.
    pub fn activation_pattern(&self, x: &[f64]) -> Vec<bool> {
        let trace = self.trace(x);
        trace.pre[..trace.pre.len() - 1]
            .iter()
            .flatten()
            .map(|z| *z > 0.0)
            .collect()
    }

    /// Predictive mean and variance for one input.
    pub fn forward(&self, x: &[f64]) -> Result<GaussianPrediction> {
        if x.len() != self.input_dim() {
            return Err(Error::Alignment(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite network input".into()));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> GaussianPrediction {
        self.trace(x).prediction()
    }

    /// Adds `scale * d nll / d params` for one sample into `grads`. Returns
    /// the sample loss and the loss gradient with respect to the input.
    fn accumulate(&self, x: &[f64], y: f64, scale: f64, grads: &mut Gradients) -> (f64, Vec<f64>) {
        let trace = self.trace(x);
        let pred = trace.prediction();
        let (_, raw_var) = trace.output();
        let r = y - pred.mean;
        let d_mean = -r / pred.var;
        let d_var = 0.5 / pred.var - 0.5 * r * r / (pred.var * pred.var);
        let mut delta = vec![d_mean, d_var * sigmoid(raw_var)];

        for (i, (layer, grad)) in self
            .layers
            .iter()
            .zip(grads.layers.iter_mut())
            .enumerate()
            .rev()
        {
            let input = &trace.acts[i];
            for (o, &dz) in delta.iter().enumerate() {
                if dz == 0.0 {
                    continue;
                }
                let row = &mut grad.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += scale * dz * a;
                }
                grad.bias[o] += scale * dz;
            }
            let mut back = vec![0.0; layer.inputs];
            for (o, &dz) in delta.iter().enumerate() {
                if dz == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (b, w) in back.iter_mut().zip(row) {
                    *b += dz * w;
                }
            }
            if i > 0 {
                // through the ReLU that produced this layer's input
                for (b, z) in back.iter_mut().zip(&trace.pre[i - 1]) {
                    if *z <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = back;
        }
        (nll(&pred, y), delta)
    }

    /// Gradient of the batch-mean loss. Returns the gradient and mean loss.
    pub fn backward(&self, xs: &[Vec<f64>], ys: &[f64]) -> (Gradients, f64) {
        let mut grads = Gradients::zeros_like(self);
        let scale = 1.0 / xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            loss += self.accumulate(x, y, scale, &mut grads).0;
        }
        (grads, loss * scale)
    }

    /// Loss gradient with respect to the input vector.
    pub fn input_gradient(&self, x: &[f64], y: f64) -> Vec<f64> {
        let mut scratch = Gradients::zeros_like(self);
        self.accumulate(x, y, 0.0, &mut scratch).1
    }

    /// Fast-gradient-sign adversarial input `x + eps * sign(grad_x nll)`.
    pub fn fgsm(&self, x: &[f64], y: f64, eps: f64) -> Vec<f64> {
        fgsm_step(x, &self.input_gradient(x, y), eps)
    }

    /// Gradient of `(nll(x) + nll(x')) / 2` averaged over the batch, where
    /// `x'` is the FGSM input for `x`. `eps = 0` skips the adversarial pass.
    /// Returns the gradient and the mean clean loss.
    pub fn adversarial_backward(&self, xs: &[Vec<f64>], ys: &[f64], eps: f64) -> (Gradients, f64) {
        if eps == 0.0 {
            return self.backward(xs, ys);
        }
        let mut grads = Gradients::zeros_like(self);
        let scale = 0.5 / xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let (l, gx) = self.accumulate(x, y, scale, &mut grads);
            loss += l;
            let adv = fgsm_step(x, &gx, eps);
            self.accumulate(&adv, y, scale, &mut grads);
        }
        (grads, loss / xs.len() as f64)
    }

    /// Mean loss over a batch.
    pub fn mean_nll(&self, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| nll(&self.predict_unchecked(x), y))
            .sum::<f64>()
            / xs.len() as f64
    }
}

fn fgsm_step(x: &[f64], grad: &[f64], eps: f64) -> Vec<f64> {
    x.iter()
        .zip(grad)
        .map(|(v, g)| {
            let s = if *g > 0.0 {
                1.0
            } else if *g < 0.0 {
                -1.0
            } else {
                0.0
            };
            v + eps * s
        })
        .collect()
}

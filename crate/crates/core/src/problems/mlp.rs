use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Problem};
use crate::error::{ensure_len, invalid, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        })
    }
}

/// Fully connected network with a softmax output layer.
///
/// Parameters are flattened layer by layer: the weight matrix (row-major,
/// `out × in`) followed by the bias vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
}

impl MlpModel {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(invalid(format!(
                "layer sizes must list at least input and output widths, all positive: {layer_sizes:?}"
            )));
        }
        Ok(Self {
            layer_sizes,
            activation,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// Gaussian weights scaled by `1/sqrt(fan_in)`, zero biases.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        let mut w = Vec::with_capacity(self.param_count());
        for pair in self.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let z: f64 = StandardNormal.sample(&mut rng);
                w.push(scale * z);
            }
            w.extend(std::iter::repeat_n(0.0, fan_out));
        }
        w
    }

    /// Class probabilities for a single input.
    pub fn predict_proba(&self, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("parameters", w.len(), self.param_count())?;
        ensure_len("input", x.len(), self.n_inputs())?;
        let acts = self.forward(w, x);
        Ok(softmax(acts.last().expect("output layer")))
    }

    /// Activations of every layer; the last entry holds the logits.
    fn forward(&self, w: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.layer_sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (pair[0], pair[1]);
            let weights = &w[offset..offset + n_in * n_out];
            let bias = &w[offset + n_in * n_out..offset + n_out * (n_in + 1)];
            offset += n_out * (n_in + 1);
            let input = &acts[l];
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    let z = bias[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    if l + 1 == n_layers {
                        z
                    } else {
                        self.activation.apply(z)
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// Adds the gradient of one sample's cross-entropy to `grad`, returning
    /// that sample's loss.
    fn backprop(&self, w: &[f64], x: &[f64], label: usize, grad: &mut [f64]) -> f64 {
        let acts = self.forward(w, x);
        let logits = acts.last().expect("output layer");
        let probs = softmax(logits);
        let loss = log_sum_exp(logits) - logits[label];

        let mut delta = probs;
        delta[label] -= 1.0;

        let mut offsets = Vec::with_capacity(self.layer_sizes.len() - 1);
        let mut offset = 0;
        for pair in self.layer_sizes.windows(2) {
            offsets.push(offset);
            offset += pair[1] * (pair[0] + 1);
        }

        for l in (0..self.layer_sizes.len() - 1).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let weights = &w[off..off + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = (0..n_out).map(|o| weights[o * n_in + i] * delta[o]).sum();
                        back * self.activation.derivative(input[i])
                    })
                    .collect();
            }
        }
        loss
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean cross-entropy over the samples in `batch` and its exact gradient.
/// Weight decay is not included.
pub fn mlp_eval_grad(m: &MlpModel, w: &[f64], data: &Dataset, batch: &[usize]) -> Result<(f64, Vec<f64>)> {
    ensure_len("parameters", w.len(), m.param_count())?;
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    if data.n_features != m.n_inputs() || data.n_classes != m.n_outputs() {
        return Err(invalid(format!(
            "model {:?} does not fit data with {} features and {} classes",
            m.layer_sizes, data.n_features, data.n_classes
        )));
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= data.len()) {
        return Err(invalid(format!("sample index {i} out of range")));
    }
    let mut grad = vec![0.0; w.len()];
    let mut loss = 0.0;
    for &i in batch {
        loss += m.backprop(w, data.input(i), data.labels[i], &mut grad);
    }
    let inv = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= inv;
    }
    Ok((loss * inv, grad))
}

/// A model together with the data it is trained on.
#[derive(Debug, Clone)]
pub struct MlpProblem {
    pub model: MlpModel,
    pub data: Dataset,
    all: Vec<usize>,
}

impl MlpProblem {
    pub fn new(model: MlpModel, data: Dataset) -> Result<Self> {
        data.validate()?;
        if data.n_features != model.n_inputs() || data.n_classes != model.n_outputs() {
            return Err(invalid(format!(
                "model {:?} does not fit data with {} features and {} classes",
                model.layer_sizes, data.n_features, data.n_classes
            )));
        }
        let all = (0..data.len()).collect();
        Ok(Self { model, data, all })
    }

    /// Accuracy of `w` on another dataset with the same shape.
    pub fn accuracy_on(&self, w: &[f64], data: &Dataset) -> Result<f64> {
        ensure_len("parameters", w.len(), self.model.param_count())?;
        let mut correct = 0usize;
        for i in 0..data.len() {
            let logits = self.model.forward(w, data.input(i));
            let out = logits.last().expect("output layer");
            let pred = out
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .expect("non-empty output");
            if pred == data.labels[i] {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

impl Problem for MlpProblem {
    fn dimension(&self) -> usize {
        self.model.param_count()
    }

    fn eval_grad(&self, w: &[f64], batch: Option<&[usize]>) -> Result<(f64, Vec<f64>)> {
        mlp_eval_grad(&self.model, w, &self.data, batch.unwrap_or(&self.all))
    }

    fn n_samples(&self) -> Option<usize> {
        Some(self.data.len())
    }

    fn initial_point(&self, seed: u64) -> Vec<f64> {
        self.model.init(seed)
    }

    fn accuracy(&self, w: &[f64]) -> Option<f64> {
        self.accuracy_on(w, &self.data).ok()
    }

    fn held_out_accuracy(&self, w: &[f64], data: &Dataset) -> Option<f64> {
        if data.n_features != self.data.n_features || data.n_classes != self.data.n_classes {
            return None;
        }
        self.accuracy_on(w, data).ok()
    }

    fn describe(&self) -> String {
        let data = match (self.data.kind, self.data.seed) {
            (Some(k), Some(s)) => format!("{k}(n={},seed={s})", self.data.len()),
            _ => format!("custom(n={})", self.data.len()),
        };
        format!(
            "mlp({:?},{})+{data}",
            self.model.layer_sizes, self.model.activation
        )
    }
}

//! From-scratch dense network: normalization, relu/softmax layers with
//! inverted dropout, class-weighted cross-entropy, analytic backpropagation,
//! and Adam training.
//!
//! The default architecture is 6 -> 50 -> 40 -> 10 -> 5 with dropout 0.1
//! after the 50- and 40-neuron activations; 2855 trainable parameters.

mod adam;
mod schema;
mod train;

pub use adam::{AdamParams, AdamState};
pub use schema::{LayerDoc, ModelDocument, NormalizerDoc, MODEL_FORMAT_VERSION};
pub use train::{fit, FitOutcome, TrainConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{FeatureVector, MaterialClass, NUM_CLASSES, NUM_FEATURES};
use crate::error::{Error, Result};

/// Guard added inside `ln` so a zero probability stays finite.
pub const LOG_GUARD: f64 = 1e-12;

/// Lower bound applied to fitted per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

/// Hidden-layer widths of the default architecture.
pub const DEFAULT_HIDDEN: [usize; 3] = [50, 40, 10];

/// Dropout rate of the default architecture.
pub const DEFAULT_DROPOUT_RATE: f64 = 0.1;

/// Per-feature affine map `(x - mean) / std` fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Normalizer {
    /// Fits mean and population standard deviation per column, flooring the
    /// std at [`STD_FLOOR`] so constant columns transform to exactly zero.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "normalizer needs at least 2 records, got {}",
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("normalizer rows have mixed lengths".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        let mut std = vec![0.0; dim];
        for c in 0..dim {
            let first = rows[0][c];
            if rows.iter().all(|r| r[c] == first) {
                mean[c] = first;
                std[c] = STD_FLOOR;
                continue;
            }
            let mu = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[c] - mu) * (r[c] - mu)).sum::<f64>() / n;
            mean[c] = mu;
            std[c] = var.sqrt().max(STD_FLOOR);
        }
        Ok(Self { mean, std })
    }

    /// A no-op normalizer of the given input width.
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::ShapeMismatch("normalizer mean/std lengths differ".into()));
        }
        if std.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("normalizer std entries must be > 0".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.mean.len());
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}

/// Fits the normalization stage on training features.
pub fn fit_normalizer(train_features: &[FeatureVector]) -> Result<Normalizer> {
    let rows: Vec<Vec<f64>> = train_features.iter().map(|f| f.as_array().to_vec()).collect();
    Normalizer::fit(&rows)
}

/// Activation applied after a dense layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softmax,
    /// Pass-through.
    None,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
            Activation::None => "none",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::Relu),
            "softmax" => Ok(Activation::Softmax),
            "none" => Ok(Activation::None),
            other => Err(Error::ModelDocument(format!("unknown activation {other:?}"))),
        }
    }
}

/// Fully connected layer with row-major `out_dim x in_dim` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Vec<f64>,
    biases: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != in_dim * out_dim || biases.len() != out_dim {
            return Err(Error::ShapeMismatch(format!(
                "layer {out_dim}x{in_dim}: got {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("layer parameters must be finite".into()));
        }
        Ok(Self { weights, biases, in_dim, out_dim, activation })
    }

    /// Glorot-uniform initialized layer: weights on
    /// `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            weights,
            biases: vec![0.0; out_dim],
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn affine(&self, input: &[f64]) -> Vec<f64> {
        let mut out = self.biases.clone();
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            *out_v += acc;
        }
        out
    }
}

/// Numerically stable softmax: shifts by the max before exponentiating, so
/// logits up to around 1e300 in magnitude stay finite.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn apply_activation(activation: Activation, z: &[f64]) -> Vec<f64> {
    match activation {
        Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
        Activation::Softmax => softmax(z),
        Activation::None => z.to_vec(),
    }
}

/// Intermediate values of one training-mode forward pass, consumed by
/// [`MlpModel::backward`]. Holds the exact dropout masks that were applied.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input actually fed to each layer (post-dropout of the previous one).
    layer_inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    /// Per-layer dropout scale (0 for dropped units, 1/keep for survivors).
    masks: Vec<Option<Vec<f64>>>,
    probs: Vec<f64>,
}

impl ForwardCache {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Per-layer weight and bias gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for w in &mut layer.weights {
                *w *= factor;
            }
            for b in &mut layer.biases {
                *b *= factor;
            }
        }
    }
}

/// The full classification model: frozen normalizer plus dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    normalizer: Normalizer,
    layers: Vec<DenseLayer>,
    dropout_rate: f64,
    /// Indices of layers after whose activation dropout applies in training.
    dropout_layers: Vec<usize>,
    class_order: Vec<MaterialClass>,
}

impl MlpModel {
    pub fn new(
        normalizer: Normalizer,
        layers: Vec<DenseLayer>,
        dropout_rate: f64,
        dropout_layers: Vec<usize>,
        class_order: Vec<MaterialClass>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one layer".into()));
        }
        let mut dim = normalizer.dim();
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim != dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} expects {} inputs but receives {dim}",
                    layer.in_dim
                )));
            }
            dim = layer.out_dim;
        }
        if class_order.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "class order has {} entries for {dim} outputs",
                class_order.len()
            )));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must be in [0, 1), got {dropout_rate}"
            )));
        }
        if dropout_layers.iter().any(|&i| i >= layers.len()) {
            return Err(Error::InvalidConfig("dropout index beyond last layer".into()));
        }
        Ok(Self { normalizer, layers, dropout_rate, dropout_layers, class_order })
    }

    /// The default architecture (6 -> 50 -> 40 -> 10 -> 5 softmax, dropout
    /// 0.1 after the first two hidden activations), Glorot-initialized
    /// from `rng`.
    pub fn init_default<R: Rng>(normalizer: Normalizer, rng: &mut R) -> Result<Self> {
        if normalizer.dim() != NUM_FEATURES {
            return Err(Error::ShapeMismatch(format!(
                "default architecture takes {NUM_FEATURES} features, normalizer has {}",
                normalizer.dim()
            )));
        }
        let dims = [
            NUM_FEATURES,
            DEFAULT_HIDDEN[0],
            DEFAULT_HIDDEN[1],
            DEFAULT_HIDDEN[2],
            NUM_CLASSES,
        ];
        let mut layers = Vec::new();
        for i in 0..dims.len() - 1 {
            let activation = if i == dims.len() - 2 {
                Activation::Softmax
            } else {
                Activation::Relu
            };
            layers.push(DenseLayer::glorot(dims[i], dims[i + 1], activation, rng));
        }
        Self::new(
            normalizer,
            layers,
            DEFAULT_DROPOUT_RATE,
            vec![0, 1],
            MaterialClass::ALL.to_vec(),
        )
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn dropout_layers(&self) -> &[usize] {
        &self.dropout_layers
    }

    pub fn class_order(&self) -> &[MaterialClass] {
        &self.class_order
    }

    pub fn input_dim(&self) -> usize {
        self.normalizer.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    /// Total number of trainable weights and biases.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Inference-mode forward pass: no dropout, no stochasticity.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        let (probs, _) = self.run_forward(input, None, false)?;
        Ok(probs)
    }

    /// Training-mode forward pass with inverted dropout: each unit after a
    /// dropout layer is zeroed with probability `dropout_rate` and survivors
    /// scale by `1 / (1 - dropout_rate)`. Returns the cache [`backward`]
    /// needs.
    ///
    /// [`backward`]: MlpModel::backward
    pub fn forward_train<R: Rng>(&self, input: &[f64], rng: &mut R) -> Result<(Vec<f64>, ForwardCache)> {
        let masks = self.draw_masks(rng);
        let (probs, cache) = self.run_forward(input, Some(masks), true)?;
        Ok((probs, cache.expect("cache requested")))
    }

    fn draw_masks<R: Rng>(&self, rng: &mut R) -> Vec<Option<Vec<f64>>> {
        let mut masks: Vec<Option<Vec<f64>>> = vec![None; self.layers.len()];
        if self.dropout_rate == 0.0 {
            return masks;
        }
        let keep_scale = 1.0 / (1.0 - self.dropout_rate);
        for &layer_idx in &self.dropout_layers {
            let width = self.layers[layer_idx].out_dim;
            let mask = (0..width)
                .map(|_| {
                    if rng.random::<f64>() < self.dropout_rate {
                        0.0
                    } else {
                        keep_scale
                    }
                })
                .collect();
            masks[layer_idx] = Some(mask);
        }
        masks
    }

    fn run_forward(
        &self,
        input: &[f64],
        masks: Option<Vec<Option<Vec<f64>>>>,
        want_cache: bool,
    ) -> Result<(Vec<f64>, Option<ForwardCache>)> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "model takes {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let masks = masks.unwrap_or_else(|| vec![None; self.layers.len()]);
        let mut layer_inputs = Vec::new();
        let mut pre_activations = Vec::new();

        let mut current = self.normalizer.transform(input);
        for (l, layer) in self.layers.iter().enumerate() {
            if want_cache {
                layer_inputs.push(current.clone());
            }
            let z = layer.affine(&current);
            let mut a = apply_activation(layer.activation, &z);
            if let Some(mask) = &masks[l] {
                for (v, m) in a.iter_mut().zip(mask) {
                    *v *= m;
                }
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericOverflow {
                    layer: l,
                    detail: "non-finite activation".into(),
                });
            }
            if want_cache {
                pre_activations.push(z);
            }
            current = a;
        }
        let probs = current;
        let cache = want_cache.then(|| ForwardCache {
            layer_inputs,
            pre_activations,
            masks,
            probs: probs.clone(),
        });
        Ok((probs, cache))
    }

    /// Analytic gradients of the weighted cross-entropy for one sample,
    /// accumulated into `grads`. Reuses the dropout masks recorded by
    /// [`MlpModel::forward_train`].
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        label_index: usize,
        weight: f64,
        grads: &mut Gradients,
    ) -> Result<()> {
        let last = self.layers.len() - 1;
        if self.layers[last].activation != Activation::Softmax {
            return Err(Error::ShapeMismatch(
                "backward requires a softmax output layer".into(),
            ));
        }
        if cache.layer_inputs.len() != self.layers.len()
            || grads.layers.len() != self.layers.len()
            || label_index >= self.output_dim()
        {
            return Err(Error::ShapeMismatch(
                "forward cache does not match this model".into(),
            ));
        }

        // Softmax + cross-entropy collapses to (p - y) at the logits.
        let mut delta: Vec<f64> = cache
            .probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let y = if i == label_index { 1.0 } else { 0.0 };
                weight * (p - y)
            })
            .collect();

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.layer_inputs[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gw, &x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if l == 0 {
                break;
            }
            // dL/d a_{l-1}: transpose multiply, then back through the
            // previous layer's dropout mask and relu.
            let prev = &self.layers[l - 1];
            let mut da = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (dv, &w) in da.iter_mut().zip(row) {
                    *dv += w * d;
                }
            }
            if let Some(mask) = &cache.masks[l - 1] {
                for (dv, m) in da.iter_mut().zip(mask) {
                    *dv *= m;
                }
            }
            let z_prev = &cache.pre_activations[l - 1];
            delta = match prev.activation {
                Activation::Relu => da
                    .iter()
                    .zip(z_prev)
                    .map(|(&dv, &z)| if z > 0.0 { dv } else { 0.0 })
                    .collect(),
                Activation::None => da,
                Activation::Softmax => {
                    return Err(Error::ShapeMismatch(
                        "softmax is only supported on the output layer".into(),
                    ))
                }
            };
        }
        Ok(())
    }

    /// Convenience wrapper over [`MlpModel::backward_into`] returning a
    /// fresh gradient set.
    pub fn backward(&self, cache: &ForwardCache, label_index: usize, weight: f64) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(cache, label_index, weight, &mut grads)?;
        Ok(grads)
    }

    pub(crate) fn layer_params_mut(&mut self, idx: usize) -> (&mut [f64], &mut [f64]) {
        let layer = &mut self.layers[idx];
        (&mut layer.weights, &mut layer.biases)
    }
}

/// Per-class loss multipliers `N / (K_present * N_c)`; absent classes get 0.
pub fn class_weights(label_counts: &[usize; NUM_CLASSES]) -> Result<[f64; NUM_CLASSES]> {
    let total: usize = label_counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyDataset("class weights of an empty dataset".into()));
    }
    let present = label_counts.iter().filter(|&&n| n > 0).count();
    let mut weights = [0.0; NUM_CLASSES];
    for (w, &n) in weights.iter_mut().zip(label_counts) {
        if n > 0 {
            *w = total as f64 / (present * n) as f64;
        }
    }
    Ok(weights)
}

/// Class-weighted cross-entropy of one prediction:
/// `-weights[label] * ln(probs[label] + 1e-12)`.
pub fn weighted_cross_entropy(probs: &[f64], label_index: usize, weights: &[f64]) -> f64 {
    debug_assert!(label_index < probs.len());
    debug_assert_eq!(weights.len(), probs.len());
    -weights[label_index] * (probs[label_index] + LOG_GUARD).ln()
}

/// Compares analytic gradients against central differences on `probes`
/// randomly chosen parameters and returns the worst relative error,
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1)`.
///
/// Requires a dropout-free model; with dropout active the loss is not a
/// deterministic function of the parameters and the comparison would be
/// meaningless.
pub fn gradient_check<R: Rng>(
    model: &MlpModel,
    input: &[f64],
    label_index: usize,
    label_weight: f64,
    step: f64,
    probes: usize,
    rng: &mut R,
) -> Result<f64> {
    if model.dropout_rate() != 0.0 {
        return Err(Error::InvalidConfig(
            "gradient check requires dropout rate 0".into(),
        ));
    }
    let mut weights = vec![0.0; model.output_dim()];
    weights[label_index] = label_weight;

    let (_, cache) = model.forward_train(input, rng)?;
    let analytic = model.backward(&cache, label_index, label_weight)?;

    let total = model.param_count();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let flat = rng.random_range(0..total);
        let a = flat_gradient(&analytic, flat);

        let mut plus = model.clone();
        *flat_param_mut(&mut plus, flat) += step;
        let loss_plus = weighted_cross_entropy(&plus.infer(input)?, label_index, &weights);

        let mut minus = model.clone();
        *flat_param_mut(&mut minus, flat) -= step;
        let loss_minus = weighted_cross_entropy(&minus.infer(input)?, label_index, &weights);

        let numeric = (loss_plus - loss_minus) / (2.0 * step);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn flat_gradient(grads: &Gradients, mut flat: usize) -> f64 {
    for layer in &grads.layers {
        if flat < layer.weights.len() {
            return layer.weights[flat];
        }
        flat -= layer.weights.len();
        if flat < layer.biases.len() {
            return layer.biases[flat];
        }
        flat -= layer.biases.len();
    }
    unreachable!("flat index beyond parameter count");
}

fn flat_param_mut(model: &mut MlpModel, mut flat: usize) -> &mut f64 {
    for idx in 0..model.layers.len() {
        let (w_len, b_len) = {
            let l = &model.layers[idx];
            (l.weights.len(), l.biases.len())
        };
        if flat < w_len {
            return &mut model.layers[idx].weights[flat];
        }
        flat -= w_len;
        if flat < b_len {
            return &mut model.layers[idx].biases[flat];
        }
        flat -= b_len;
    }
    unreachable!("flat index beyond parameter count");
}

/// Classifies one feature vector: inference forward pass, argmax with
/// ties resolved to the lowest class code.
pub fn predict(model: &MlpModel, features: &FeatureVector) -> Result<(MaterialClass, Vec<f64>)> {
    let probs = model.infer(&features.as_array())?;
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    Ok((model.class_order()[best], probs))
}

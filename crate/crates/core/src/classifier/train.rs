//! Full training loop: stratified split, train-only normalization, Glorot
//! init, shuffled mini-batches, class-weighted loss, Adam updates.

use serde::{Deserialize, Serialize};

use super::{class_weights, weighted_cross_entropy, AdamParams, AdamState, Gradients, MlpModel, Normalizer};
use crate::domain::{Dataset, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::evaluation::{train_test_split, SplitMode};
use crate::seed::{derive_rng, stream};

/// Training hyperparameters. The defaults reproduce the reference setup:
/// 100 epochs of batch-32 Adam at 1e-3 on a stratified 70/30 split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub use_class_weights: bool,
    pub split_mode: SplitMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            test_fraction: 0.30,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            seed: 7,
            use_class_weights: true,
            split_mode: SplitMode::Stratified,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    fn adam_params(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Everything `fit` produces: the trained model, the loss curve, the split
/// it used, and the loss weights it applied.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: MlpModel,
    pub epoch_losses: Vec<f64>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub class_weights: [f64; NUM_CLASSES],
}

/// Trains the default architecture on a labeled feature dataset.
///
/// The dataset is split before anything else; the normalizer and the class
/// weights are fitted on the training portion only, so no test statistics
/// leak into the model. Identical inputs and config give a bitwise
/// identical model.
pub fn fit(dataset: &Dataset, config: &TrainConfig) -> Result<FitOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("cannot train on an empty dataset".into()));
    }
    let labels = dataset.labels();
    let distinct = {
        let counts = dataset.label_counts();
        counts.iter().filter(|&&n| n > 0).count()
    };
    if distinct < 2 {
        return Err(Error::DegenerateTraining(format!(
            "training needs at least 2 classes, dataset has {distinct}"
        )));
    }

    let split = train_test_split(&labels, config.test_fraction, config.seed, config.split_mode)?;

    let train_rows: Vec<Vec<f64>> = split
        .train
        .iter()
        .map(|&i| dataset.records[i].0.as_array().to_vec())
        .collect();
    let normalizer = Normalizer::fit(&train_rows)?;

    let mut train_counts = [0usize; NUM_CLASSES];
    for &i in &split.train {
        train_counts[dataset.records[i].1.code() as usize] += 1;
    }
    let weights = if config.use_class_weights {
        class_weights(&train_counts)?
    } else {
        [1.0; NUM_CLASSES]
    };

    let mut init_rng = derive_rng(config.seed, &[stream::INIT]);
    let mut model = MlpModel::init_default(normalizer, &mut init_rng)?;
    let mut shuffle_rng = derive_rng(config.seed, &[stream::SHUFFLE]);
    let mut dropout_rng = derive_rng(config.seed, &[stream::DROPOUT]);

    let params = config.adam_params();
    let mut adam = AdamState::new(&model);
    let mut order: Vec<usize> = split.train.clone();
    let mut grads = Gradients::zeros_like(&model);
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.scale(0.0);
            for &row in batch {
                let (features, label) = &dataset.records[row];
                let label_index = label.code() as usize;
                let (probs, cache) = model.forward_train(&features.as_array(), &mut dropout_rng)?;
                loss_sum += weighted_cross_entropy(&probs, label_index, &weights);
                model.backward_into(&cache, label_index, weights[label_index], &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model, &grads, &params);
        }
        epoch_losses.push(loss_sum / order.len() as f64);
    }

    Ok(FitOutcome {
        model,
        epoch_losses,
        train_indices: split.train,
        test_indices: split.test,
        class_weights: weights,
    })
}

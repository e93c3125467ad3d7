//! Adam parameter updates with bias-corrected first and second moments.

use super::{Gradients, MlpModel};

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

struct Moments {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

/// First/second moment accumulators, one pair per layer, plus the step count.
pub struct AdamState {
    m: Vec<Moments>,
    v: Vec<Moments>,
    t: u64,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        let zeros = || {
            model
                .layers()
                .iter()
                .map(|l| Moments {
                    weights: vec![0.0; l.weights().len()],
                    biases: vec![0.0; l.biases().len()],
                })
                .collect::<Vec<_>>()
        };
        Self { m: zeros(), v: zeros(), t: 0 }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update: `p -= lr * m_hat / (sqrt(v_hat) + eps)` with
    /// `m_hat = m / (1 - beta1^t)` and `v_hat = v / (1 - beta2^t)`, `t`
    /// starting at 1.
    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients, params: &AdamParams) {
        self.t += 1;
        let c1 = 1.0 - params.beta1.powi(self.t as i32);
        let c2 = 1.0 - params.beta2.powi(self.t as i32);
        for layer_idx in 0..grads.layers.len() {
            let g = &grads.layers[layer_idx];
            let (weights, biases) = model.layer_params_mut(layer_idx);
            update_slice(
                weights,
                &g.weights,
                &mut self.m[layer_idx].weights,
                &mut self.v[layer_idx].weights,
                params,
                c1,
                c2,
            );
            update_slice(
                biases,
                &g.biases,
                &mut self.m[layer_idx].biases,
                &mut self.v[layer_idx].biases,
                params,
                c1,
                c2,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    values: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    params: &AdamParams,
    c1: f64,
    c2: f64,
) {
    for i in 0..values.len() {
        let g = grads[i];
        m[i] = params.beta1 * m[i] + (1.0 - params.beta1) * g;
        v[i] = params.beta2 * v[i] + (1.0 - params.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        values[i] -= params.learning_rate * m_hat / (v_hat.sqrt() + params.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{Activation, DenseLayer, MlpModel, Normalizer};
    use crate::domain::MaterialClass;
    use approx::assert_abs_diff_eq;

    fn tiny_model() -> MlpModel {
        let layer = DenseLayer::new(
            1,
            2,
            vec![0.5, -0.25],
            vec![0.0, 0.1],
            Activation::Softmax,
        )
        .unwrap();
        MlpModel::new(
            Normalizer::identity(1),
            vec![layer],
            0.0,
            vec![],
            vec![MaterialClass::Metal, MaterialClass::Plastic],
        )
        .unwrap()
    }

    fn grad_of(model: &MlpModel, values: [f64; 2]) -> Gradients {
        let mut g = Gradients::zeros_like(model);
        g.layers[0].weights.copy_from_slice(&values);
        g
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With t = 1 the bias corrections cancel the decay exactly, so the
        // update is lr * g / (|g| + eps) which is roughly lr * sign(g).
        let mut model = tiny_model();
        let mut state = AdamState::new(&model);
        let params = AdamParams::default();
        let grads = grad_of(&model, [0.2, -0.4]);
        state.step(&mut model, &grads, &params);
        let w = model.layers()[0].weights();
        assert_abs_diff_eq!(w[0], 0.5 - 1e-3 * (0.2 / (0.2 + 1e-7)), epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], -0.25 + 1e-3 * (0.4 / (0.4 + 1e-7)), epsilon = 1e-15);
        assert_eq!(state.steps(), 1);
    }

    #[test]
    fn matches_scalar_reference_over_five_steps() {
        let mut model = tiny_model();
        let mut state = AdamState::new(&model);
        let params = AdamParams {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        };

        // Scalar re-implementation tracking only the first weight.
        let mut w = 0.5;
        let mut m = 0.0;
        let mut v = 0.0;
        for t in 1..=5 {
            let g = 0.3 * t as f64;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            w -= 0.01 * m_hat / (v_hat.sqrt() + 1e-7);

            let grads = grad_of(&model, [0.3 * t as f64, 0.0]);
            state.step(&mut model, &grads, &params);
        }
        assert_abs_diff_eq!(model.layers()[0].weights()[0], w, epsilon = 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut model = tiny_model();
        let before = model.clone();
        let mut state = AdamState::new(&model);
        let grads = Gradients::zeros_like(&model);
        for _ in 0..3 {
            state.step(&mut model, &grads, &AdamParams::default());
        }
        assert_eq!(model, before);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut model = tiny_model();
        let before = model.clone();
        let mut state = AdamState::new(&model);
        let params = AdamParams { learning_rate: 0.0, ..AdamParams::default() };
        let grads = grad_of(&model, [1.0, -2.0]);
        state.step(&mut model, &grads, &params);
        assert_eq!(model, before);
    }
}

use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MLPParams};
use crate::error::{Error, Result};

/// Adam optimizer state, with first/second-moment accumulators shaped to a
/// specific network's parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, net: &MLPParams) -> Self {
        let lens = net.param_tensor_lens();
        AdamState {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first_moment: lens.iter().map(|&l| vec![0.0; l]).collect(),
            second_moment: lens.iter().map(|&l| vec![0.0; l]).collect(),
        }
    }

    /// Applies one bias-corrected Adam update in place and increments the
    /// step counter.
    pub fn step(&mut self, net: &mut MLPParams, grads: &Gradients) -> Result<()> {
        let grad_tensors = grads.tensors();
        let mut params = net.param_tensors_mut();
        if params.len() != grad_tensors.len()
            || params.len() != self.first_moment.len()
            || params
                .iter()
                .zip(&grad_tensors)
                .zip(&self.first_moment)
                .any(|((p, g), m)| p.len() != g.len() || p.len() != m.len())
        {
            return Err(Error::Shape("optimizer state does not match gradients".into()));
        }
        for g in &grad_tensors {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("non-finite gradient in Adam step".into()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(&grad_tensors)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::activation::Activation;
    use crate::nn::matrix::Matrix;
    use crate::nn::mlp::{LayerSpec, Mode};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// One-parameter net (1x1 weight, bias pinned by zero grads) for scalar
    /// Adam traces.
    fn scalar_net(w: f64) -> MLPParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net =
            MLPParams::build(1, &[LayerSpec::new(1, Activation::Identity)], &mut rng).unwrap();
        net.layers[0].weight = Matrix::from_vec(1, 1, vec![w]).unwrap();
        net.layers[0].bias = vec![0.0];
        net
    }

    fn scalar_grads(net: &MLPParams, g: f64) -> Gradients {
        let x = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let (_, cache) = net.forward(&x, Mode::Train).unwrap();
        let upstream = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
        let mut grads = net.backward(&cache, &upstream).unwrap();
        grads.layers[0].weight = Matrix::from_vec(1, 1, vec![g]).unwrap();
        grads.layers[0].bias = vec![0.0];
        grads
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = scalar_net(0.0);
        let mut adam = AdamState::new(0.001, &net);
        let grads = scalar_grads(&net, 1.0);
        adam.step(&mut net, &grads).unwrap();
        let w = net.layers[0].weight.get(0, 0);
        assert!((w + 0.001).abs() < 1e-8, "first step should be ≈ -lr, got {w}");
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_gradient_with_zero_moments_leaves_params() {
        let mut net = scalar_net(0.7);
        let mut adam = AdamState::new(0.01, &net);
        let grads = scalar_grads(&net, 0.0);
        adam.step(&mut net, &grads).unwrap();
        assert_eq!(net.layers[0].weight.get(0, 0), 0.7);
    }

    #[test]
    fn second_identical_step_has_magnitude_close_to_lr() {
        // Hand-evaluated recurrence for g=1 twice: both bias-corrected moments
        // are exactly 1, so each update is lr/(1+eps).
        let lr = 0.001;
        let mut net = scalar_net(0.0);
        let mut adam = AdamState::new(lr, &net);
        let grads = scalar_grads(&net, 1.0);
        adam.step(&mut net, &grads).unwrap();
        let w1 = net.layers[0].weight.get(0, 0);
        adam.step(&mut net, &grads).unwrap();
        let w2 = net.layers[0].weight.get(0, 0);
        let second_update = (w2 - w1).abs();
        assert!((second_update - lr).abs() < 1e-6 * lr, "update {second_update}");
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut net = scalar_net(0.3);
        let before = net.clone();
        let mut adam = AdamState::new(0.0, &net);
        let grads = scalar_grads(&net, 2.5);
        adam.step(&mut net, &grads).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut net = scalar_net(0.0);
        let mut adam = AdamState::new(0.001, &net);
        let grads = scalar_grads(&net, f64::NAN);
        assert!(matches!(adam.step(&mut net, &grads), Err(Error::Numeric(_))));
    }
}

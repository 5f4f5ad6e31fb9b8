use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::batchnorm::{BatchNormState, BnCache};
use super::layer::DenseLayer;
use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Blueprint for one layer of an [`MLPParams`] network.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub out_dim: usize,
    pub activation: Activation,
    pub batch_norm: bool,
    pub spectral_norm: bool,
}

impl LayerSpec {
    pub fn new(out_dim: usize, activation: Activation) -> Self {
        LayerSpec { out_dim, activation, batch_norm: false, spectral_norm: false }
    }

    pub fn with_batch_norm(mut self) -> Self {
        self.batch_norm = true;
        self
    }

    pub fn with_spectral_norm(mut self) -> Self {
        self.spectral_norm = true;
        self
    }
}

/// Feed-forward network: dense layers with optional per-layer batch
/// normalization applied between the affine transform and the activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLPParams {
    input_dim: usize,
    pub layers: Vec<DenseLayer>,
    pub batch_norms: Vec<Option<BatchNormState>>,
    pub hidden_dim: usize,
}

/// Per-layer activation record kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    bn: Option<BnCache>,
    preact: Matrix,
    output: Matrix,
    eff_weight: Matrix,
    sn_sigma: Option<f64>,
}

/// Activation record produced by [`MLPParams::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mode: Mode,
    input: Matrix,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn output(&self) -> &Matrix {
        &self.layers.last().expect("cache has at least one layer").output
    }
}

/// Parameter gradients for one layer.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
}

/// Full gradient of a scalar loss w.r.t. parameters and network input.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    pub input: Matrix,
}

impl Gradients {
    /// Flattened views in the same order as [`MLPParams::param_tensors_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for lg in &self.layers {
            out.push(lg.weight.data());
            out.push(lg.bias.as_slice());
            if let Some(g) = &lg.gamma {
                out.push(g.as_slice());
            }
            if let Some(b) = &lg.beta {
                out.push(b.as_slice());
            }
        }
        out
    }
}

impl MLPParams {
    pub fn build<R: Rng + ?Sized>(
        input_dim: usize,
        specs: &[LayerSpec],
        rng: &mut R,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Validation("network needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut batch_norms = Vec::with_capacity(specs.len());
        let mut dim = input_dim;
        for spec in specs {
            layers.push(DenseLayer::new(
                dim,
                spec.out_dim,
                spec.activation.clone(),
                spec.spectral_norm,
                rng,
            )?);
            batch_norms.push(spec.batch_norm.then(|| BatchNormState::new(spec.out_dim)));
            dim = spec.out_dim;
        }
        let hidden_dim = specs
            .iter()
            .take(specs.len().saturating_sub(1))
            .map(|s| s.out_dim)
            .max()
            .unwrap_or(input_dim);
        Ok(MLPParams { input_dim, layers, batch_norms, hidden_dim })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    /// Forward pass. Train mode uses batch statistics for normalization; eval
    /// mode is deterministic given parameters. Neither mutates the network.
    pub fn forward(&self, batch: &Matrix, mode: Mode) -> Result<(Matrix, ForwardCache)> {
        if batch.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "input width {} vs network input dim {}",
                batch.cols(),
                self.input_dim
            )));
        }
        if !batch.all_finite() {
            return Err(Error::Numeric("non-finite values in network input".into()));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (eff_weight, sn_sigma) = layer.effective_weight();
            let mut affine = cur.matmul_bt(&eff_weight)?;
            for r in 0..affine.rows() {
                for (v, b) in affine.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let (preact, bn_cache) = match (&self.batch_norms[i], mode) {
                (Some(bn), Mode::Train) => {
                    let (out, cache) = bn.forward_train(&affine)?;
                    (out, Some(cache))
                }
                (Some(bn), Mode::Eval) => (bn.forward_eval(&affine)?, None),
                (None, _) => (affine, None),
            };
            let output = layer.activation.apply(&preact);
            if !output.all_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite activation in layer {i}"
                )));
            }
            caches.push(LayerCache {
                bn: bn_cache,
                preact,
                output: output.clone(),
                eff_weight,
                sn_sigma,
            });
            cur = output;
        }
        Ok((cur, ForwardCache { mode, input: batch.clone(), layers: caches }))
    }

    /// Eval-mode forward without building a cache.
    pub fn forward_eval(&self, batch: &Matrix) -> Result<Matrix> {
        self.forward(batch, Mode::Eval).map(|(out, _)| out)
    }

    /// Backpropagates `upstream` (gradient w.r.t. the network output) through
    /// a cache produced by a matching train-mode forward.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<Gradients> {
        if cache.mode != Mode::Train {
            return Err(Error::Usage(
                "backward requires a cache from a train-mode forward".into(),
            ));
        }
        if cache.layers.len() != self.layers.len() || cache.input.cols() != self.input_dim {
            return Err(Error::Usage("cache does not match this network".into()));
        }
        let last = cache.layers.last().expect("non-empty cache");
        if upstream.rows() != last.output.rows() || upstream.cols() != last.output.cols() {
            return Err(Error::Shape(format!(
                "upstream gradient {}x{} vs output {}x{}",
                upstream.rows(),
                upstream.cols(),
                last.output.rows(),
                last.output.cols()
            )));
        }

        let mut layer_grads: Vec<Option<LayerGrads>> = vec![None; self.layers.len()];
        let mut g = upstream.clone();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let lc = &cache.layers[i];
            if lc.eff_weight.rows() != layer.out_dim() || lc.eff_weight.cols() != layer.in_dim() {
                return Err(Error::Usage(format!(
                    "cache for layer {i} does not match this network"
                )));
            }
            let g_pre = layer.activation.backward(&lc.preact, &lc.output, &g);
            let (g_affine, d_gamma, d_beta) = match (&self.batch_norms[i], &lc.bn) {
                (Some(bn), Some(bn_cache)) => {
                    let (gi, dg, db) = bn.backward(bn_cache, &g_pre)?;
                    (gi, Some(dg), Some(db))
                }
                (None, None) => (g_pre, None, None),
                _ => {
                    return Err(Error::Usage(format!(
                        "batch-norm cache mismatch in layer {i}"
                    )))
                }
            };
            let mut d_bias = vec![0.0; layer.out_dim()];
            for r in 0..g_affine.rows() {
                for (b, &v) in d_bias.iter_mut().zip(g_affine.row(r)) {
                    *b += v;
                }
            }
            let layer_input = if i == 0 { &cache.input } else { &cache.layers[i - 1].output };
            let d_weight_eff = g_affine.matmul_tn(layer_input)?;
            let d_weight = match lc.sn_sigma {
                Some(sigma) => spectral_weight_grad(&d_weight_eff, &lc.eff_weight, layer, sigma),
                None => d_weight_eff,
            };
            g = g_affine.matmul(&lc.eff_weight)?;
            layer_grads[i] = Some(LayerGrads { weight: d_weight, bias: d_bias, gamma: d_gamma, beta: d_beta });
        }
        Ok(Gradients {
            layers: layer_grads.into_iter().map(|g| g.expect("filled")).collect(),
            input: g,
        })
    }

    /// Folds the batch statistics of a train-mode cache into the running
    /// statistics of every batch-normalized layer.
    pub fn apply_bn_updates(&mut self, cache: &ForwardCache) -> Result<()> {
        if cache.mode != Mode::Train {
            return Err(Error::Usage("batch-norm update needs a train-mode cache".into()));
        }
        for (bn, lc) in self.batch_norms.iter_mut().zip(&cache.layers) {
            if let (Some(bn), Some(bn_cache)) = (bn, &lc.bn) {
                bn.update_running(bn_cache);
            }
        }
        Ok(())
    }

    /// One power-iteration refresh on every spectrally normalized layer;
    /// called by training loops after each weight update.
    pub fn power_iterate_all(&mut self, iters: usize) {
        for layer in &mut self.layers {
            if layer.spectral_norm_enabled {
                layer.power_iterate(iters);
            }
        }
    }

    /// Flattened mutable parameter views, ordered layer by layer as
    /// `[weight, bias, (gamma, beta)]`.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for (layer, bn) in self.layers.iter_mut().zip(self.batch_norms.iter_mut()) {
            out.push(layer.weight.data_mut());
            out.push(layer.bias.as_mut_slice());
            if let Some(bn) = bn {
                out.push(bn.gamma.as_mut_slice());
                out.push(bn.beta.as_mut_slice());
            }
        }
        out
    }

    /// Lengths of the tensors in [`MLPParams::param_tensors_mut`] order.
    pub fn param_tensor_lens(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (layer, bn) in self.layers.iter().zip(&self.batch_norms) {
            out.push(layer.weight.data().len());
            out.push(layer.bias.len());
            if let Some(bn) = bn {
                out.push(bn.gamma.len());
                out.push(bn.beta.len());
            }
        }
        out
    }

    /// Certified upper bound on the eval-mode Lipschitz constant: the product
    /// of per-layer spectral norms (estimated with `n_power_iters` fresh
    /// iterations on the effective weights), batch-norm scale factors, and
    /// activation Lipschitz bounds. Does not mutate the network.
    pub fn certified_lipschitz(&self, n_power_iters: usize) -> Result<f64> {
        if n_power_iters == 0 {
            return Err(Error::Validation("certification needs at least one iteration".into()));
        }
        let mut c = 1.0;
        for (layer, bn) in self.layers.iter().zip(&self.batch_norms) {
            let (eff, _) = layer.effective_weight();
            let mut probe = layer.clone();
            probe.weight = eff;
            probe.spectral_norm_enabled = true;
            probe.power_iterate(n_power_iters);
            let sigma = probe.sigma_estimate();
            c *= sigma;
            if let Some(bn) = bn {
                let scale = bn
                    .gamma
                    .iter()
                    .zip(&bn.running_var)
                    .map(|(g, v)| g.abs() / (v + bn.eps).sqrt())
                    .fold(0.0_f64, f64::max);
                c *= scale;
            }
            c *= layer.activation.lipschitz_bound();
        }
        Ok(c)
    }
}

/// Gradient w.r.t. the raw weight when the forward used `W/σ` with
/// `σ = uᵀWv` and a frozen power-iteration pair:
/// `dW = g/σ − (⟨g, W_eff⟩/σ)·u vᵀ`.
fn spectral_weight_grad(
    d_eff: &Matrix,
    eff_weight: &Matrix,
    layer: &DenseLayer,
    sigma: f64,
) -> Matrix {
    let mut dot = 0.0;
    for (g, w) in d_eff.data().iter().zip(eff_weight.data()) {
        dot += g * w;
    }
    let coeff = dot / sigma;
    let mut out = d_eff.scale(1.0 / sigma);
    for (i, &ui) in layer.sn_u.iter().enumerate() {
        for (o, &vj) in out.row_mut(i).iter_mut().zip(&layer.sn_v) {
            *o -= coeff * ui * vj;
        }
    }
    out
}

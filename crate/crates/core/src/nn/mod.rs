//! Minimal feed-forward neural-network engine: dense layers with leaky-ReLU /
//! sigmoid / identity / block-softmax activations, batch normalization,
//! spectral normalization via power iteration, manual backpropagation, and
//! Adam. Everything is `f64` and deterministic given seeds.

pub mod activation;
pub mod adam;
pub mod batchnorm;
pub mod checkpoint;
pub mod layer;
pub mod loss;
pub mod matrix;
pub mod mlp;

pub use activation::{sigmoid, Activation, LEAKY_RELU_SLOPE};
pub use adam::AdamState;
pub use batchnorm::BatchNormState;
pub use checkpoint::{load_mlp, save_mlp, MlpCheckpoint, CHECKPOINT_VERSION};
pub use layer::DenseLayer;
pub use loss::{clamp_prob, cross_entropy, cross_entropy_grad, PROB_CLAMP};
pub use matrix::Matrix;
pub use mlp::{ForwardCache, Gradients, LayerGrads, LayerSpec, MLPParams, Mode};

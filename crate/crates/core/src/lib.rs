//! Counterfactually fair prediction with generated counterfactual mediators.
//!
//! The pipeline has two steps. Step 1 trains a tailored GAN whose generator
//! maps `(X, A, M)` to both potential mediators; the discriminator is asked
//! which slot of the pair holds the observed factual mediator. Step 2 trains
//! a classifier `h(X, M)` under a counterfactual-mediator regularization that
//! penalizes prediction gaps between factual and generated counterfactual
//! mediators.
//!
//! Modules:
//! - [`nn`] — minimal feed-forward engine (dense layers, batch norm, spectral
//!   normalization, Adam) used by all three networks.
//! - [`data`] — synthetic/semi-synthetic simulators with ground-truth
//!   counterfactuals, CSV ingestion under a column-role schema, splitting and
//!   standardization.
//! - [`gan`] — Step 1: counterfactual generator and slot discriminator.
//! - [`predictor`] — Step 2: the regularized classifier.
//! - [`metrics`] — fairness/accuracy metrics, normalized-MSE tables,
//!   confusion rates, the quantile-matching counterfactual oracle, and
//!   histogram exports.
//! - [`testing`] — independent numerical oracles (finite differences, dense
//!   SVD) used by the test suites.

pub mod data;
pub mod error;
pub mod gan;
pub mod metrics;
pub mod nn;
pub mod predictor;
pub mod testing;

pub use error::{Error, Result};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Threshold below which a spectral-norm estimate is treated as zero
/// (all-zero weight), in which case the weight is used unchanged.
const SIGMA_FLOOR: f64 = 1e-12;

/// Dense layer `y = act(bn(x Wᵀ + b))` with row-major weight of shape
/// `(out_dim, in_dim)`.
///
/// When `spectral_norm_enabled` is set, the effective weight is `W / σ̂`
/// where `σ̂ = uᵀ W v` comes from the persisted power-iteration pair
/// `(sn_u, sn_v)`. Callers that mutate the weight must re-run
/// [`DenseLayer::power_iterate`] before the next forward pass; training
/// loops do one iteration per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub spectral_norm_enabled: bool,
    pub sn_u: Vec<f64>,
    pub sn_v: Vec<f64>,
}

impl DenseLayer {
    /// Glorot-uniform initialized layer; biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        spectral_norm_enabled: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Validation("layer dims must be positive".into()));
        }
        if !activation.validate_for_width(out_dim) {
            return Err(Error::Validation(
                "activation blocks exceed layer width".into(),
            ));
        }
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut weight = Matrix::zeros(out_dim, in_dim);
        for w in weight.data_mut() {
            *w = rng.gen_range(-limit..limit);
        }
        let sn_u: Vec<f64> = (0..out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sn_v: Vec<f64> = (0..in_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut layer = DenseLayer {
            weight,
            bias: vec![0.0; out_dim],
            activation,
            spectral_norm_enabled,
            sn_u,
            sn_v,
        };
        if spectral_norm_enabled {
            layer.power_iterate(5);
        }
        Ok(layer)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Runs `iters` power iterations, updating the persisted pair so that
    /// `σ̂ = uᵀ W v ≥ 0` estimates the largest singular value. A zero weight
    /// leaves the pair untouched.
    pub fn power_iterate(&mut self, iters: usize) {
        let (out_dim, in_dim) = (self.out_dim(), self.in_dim());
        for _ in 0..iters {
            // u = W v / ‖W v‖
            let mut u = vec![0.0; out_dim];
            for i in 0..out_dim {
                let row = self.weight.row(i);
                u[i] = row.iter().zip(&self.sn_v).map(|(w, v)| w * v).sum();
            }
            let nu = l2(&u);
            if nu < SIGMA_FLOOR {
                return;
            }
            for x in &mut u {
                *x /= nu;
            }
            // v = Wᵀ u / ‖Wᵀ u‖
            let mut v = vec![0.0; in_dim];
            for (i, &ui) in u.iter().enumerate() {
                for (vj, w) in v.iter_mut().zip(self.weight.row(i)) {
                    *vj += w * ui;
                }
            }
            let nv = l2(&v);
            if nv < SIGMA_FLOOR {
                return;
            }
            for x in &mut v {
                *x /= nv;
            }
            self.sn_u = u;
            self.sn_v = v;
        }
    }

    /// `σ̂ = uᵀ W v` with the persisted pair.
    pub fn sigma_estimate(&self) -> f64 {
        let mut sigma = 0.0;
        for (i, &ui) in self.sn_u.iter().enumerate() {
            let row = self.weight.row(i);
            let dot: f64 = row.iter().zip(&self.sn_v).map(|(w, v)| w * v).sum();
            sigma += ui * dot;
        }
        sigma
    }

    /// Refreshes the power iteration and returns the normalized effective
    /// weight `W / σ̂`. An all-zero weight is returned unchanged.
    pub fn spectral_normalize(&mut self, n_power_iters: usize) -> Result<Matrix> {
        if n_power_iters == 0 {
            return Err(Error::Validation(
                "spectral normalization needs at least one power iteration".into(),
            ));
        }
        self.power_iterate(n_power_iters);
        let sigma = self.sigma_estimate();
        if sigma.abs() < SIGMA_FLOOR {
            return Ok(self.weight.clone());
        }
        Ok(self.weight.scale(1.0 / sigma))
    }

    /// Effective weight used by forward/backward, plus the σ̂ it divides by
    /// (`None` when normalization is disabled or the weight is zero).
    pub fn effective_weight(&self) -> (Matrix, Option<f64>) {
        if !self.spectral_norm_enabled {
            return (self.weight.clone(), None);
        }
        let sigma = self.sigma_estimate();
        if sigma.abs() < SIGMA_FLOOR {
            (self.weight.clone(), None)
        } else {
            (self.weight.scale(1.0 / sigma), Some(sigma))
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer_with_weight(weight: Matrix) -> DenseLayer {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut layer = DenseLayer::new(
            weight.cols(),
            weight.rows(),
            Activation::Identity,
            true,
            &mut rng,
        )
        .unwrap();
        layer.weight = weight;
        layer
    }

    #[test]
    fn diagonal_spectrum_is_recovered() {
        let w = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mut layer = layer_with_weight(w);
        let eff = layer.spectral_normalize(50).unwrap();
        let sigma = layer.sigma_estimate();
        assert!((sigma - 3.0).abs() < 1e-3 * 3.0, "sigma {sigma}");
        assert!((eff.get(0, 0) - 1.0).abs() < 1e-3);
        assert!((eff.get(1, 1) - 1.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn orthogonal_weight_is_unchanged() {
        let (c, s) = (0.6, 0.8);
        let w = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let mut layer = layer_with_weight(w.clone());
        let eff = layer.spectral_normalize(50).unwrap();
        for r in 0..2 {
            for col in 0..2 {
                assert!((eff.get(r, col) - w.get(r, col)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_weight_passes_through() {
        let w = Matrix::zeros(3, 2);
        let mut layer = layer_with_weight(w.clone());
        let eff = layer.spectral_normalize(10).unwrap();
        assert_eq!(eff, w);
    }

    #[test]
    fn zero_power_iters_is_an_error() {
        let mut layer = layer_with_weight(Matrix::zeros(2, 2));
        assert!(matches!(
            layer.spectral_normalize(0),
            Err(Error::Validation(_))
        ));
    }
}

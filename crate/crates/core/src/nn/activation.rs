use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

/// Negative-side slope of the leaky ReLU.
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

/// Element-wise (or block-wise) activation applied after a layer's affine
/// transform and optional batch normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu,
    Sigmoid,
    Identity,
    /// Row-wise softmax over each listed `(start, len)` column block;
    /// coordinates outside every block pass through unchanged. Used for the
    /// discriminator's two-slot head and for one-hot mediator blocks.
    BlockSoftmax { blocks: Vec<(usize, usize)> },
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(&self, pre: &Matrix) -> Matrix {
        match self {
            Activation::LeakyRelu => {
                pre.map(|v| if v >= 0.0 { v } else { LEAKY_RELU_SLOPE * v })
            }
            Activation::Sigmoid => pre.map(sigmoid),
            Activation::Identity => pre.clone(),
            Activation::BlockSoftmax { blocks } => {
                let mut out = pre.clone();
                for r in 0..out.rows() {
                    let row = out.row_mut(r);
                    for &(start, len) in blocks {
                        softmax_in_place(&mut row[start..start + len]);
                    }
                }
                out
            }
        }
    }

    /// Propagates an upstream gradient (w.r.t. the activation output) back to
    /// the pre-activation, given both the pre-activation and the output.
    pub fn backward(&self, pre: &Matrix, out: &Matrix, upstream: &Matrix) -> Matrix {
        match self {
            Activation::LeakyRelu => {
                let mut g = upstream.clone();
                for (gv, &z) in g.data_mut().iter_mut().zip(pre.data()) {
                    if z < 0.0 {
                        *gv *= LEAKY_RELU_SLOPE;
                    }
                }
                g
            }
            Activation::Sigmoid => {
                let mut g = upstream.clone();
                for (gv, &y) in g.data_mut().iter_mut().zip(out.data()) {
                    *gv *= y * (1.0 - y);
                }
                g
            }
            Activation::Identity => upstream.clone(),
            Activation::BlockSoftmax { blocks } => {
                let mut g = upstream.clone();
                for r in 0..g.rows() {
                    let y_row = out.row(r);
                    let g_row = g.row_mut(r);
                    for &(start, len) in blocks {
                        let y = &y_row[start..start + len];
                        let gs = &mut g_row[start..start + len];
                        let dot: f64 = y.iter().zip(gs.iter()).map(|(a, b)| a * b).sum();
                        for (gv, &yv) in gs.iter_mut().zip(y) {
                            *gv = yv * (*gv - dot);
                        }
                    }
                }
                g
            }
        }
    }

    /// Upper bound on the activation's Lipschitz constant, used when
    /// certifying a network's overall constant.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            Activation::LeakyRelu | Activation::Identity => 1.0,
            Activation::Sigmoid => 0.25,
            Activation::BlockSoftmax { .. } => 1.0,
        }
    }

    /// Checks that every block stays inside a row of the given width.
    pub fn validate_for_width(&self, width: usize) -> bool {
        match self {
            Activation::BlockSoftmax { blocks } => {
                blocks.iter().all(|&(s, l)| l >= 1 && s + l <= width)
            }
            _ => true,
        }
    }
}

fn softmax_in_place(vals: &mut [f64]) {
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in vals.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in vals.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_matches_definition() {
        let pre = Matrix::from_rows(&[vec![-1.0, 3.0]]).unwrap();
        let out = Activation::LeakyRelu.apply(&pre);
        assert_eq!(out.row(0), &[-0.01, 3.0]);
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let pre = Matrix::from_rows(&[vec![0.0]]).unwrap();
        let out = Activation::Sigmoid.apply(&pre);
        assert_eq!(out.get(0, 0), 0.5);
    }

    #[test]
    fn block_softmax_rows_sum_to_one() {
        let act = Activation::BlockSoftmax { blocks: vec![(0, 2)] };
        let pre = Matrix::from_rows(&[vec![2.0, -1.0, 7.0]]).unwrap();
        let out = act.apply(&pre);
        let s = out.get(0, 0) + out.get(0, 1);
        assert!((s - 1.0).abs() < 1e-12);
        // pass-through outside the block
        assert_eq!(out.get(0, 2), 7.0);
    }
}

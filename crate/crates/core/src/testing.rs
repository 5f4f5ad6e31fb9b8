//! Independent numerical oracles for the test suites. These deliberately
//! avoid the backpropagation and power-iteration code paths they are used to
//! check: gradients come from central finite differences over forward passes
//! only, and spectral norms from a dense Jacobi eigensolver.

use crate::error::Result;
use crate::nn::{Matrix, MLPParams, Mode};

/// Central finite-difference gradient of `f` at `point`.
pub fn numerical_gradient(
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    step: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; point.len()];
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + step;
        let fp = f(&probe);
        probe[i] = point[i] - step;
        let fm = f(&probe);
        probe[i] = point[i];
        grad[i] = (fp - fm) / (2.0 * step);
    }
    grad
}

/// Largest singular value via Jacobi diagonalization of `WᵀW`.
pub fn svd_spectral_norm(w: &Matrix) -> f64 {
    let n = w.cols();
    // gram = WᵀW, symmetric n×n
    let mut gram = vec![vec![0.0; n]; n];
    for r in 0..w.rows() {
        let row = w.row(r);
        for i in 0..n {
            for j in i..n {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            gram[i][j] = gram[j][i];
        }
    }
    // cyclic Jacobi sweeps
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += gram[i][j] * gram[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = gram[p][q];
                if apq.abs() < 1e-30 {
                    continue;
                }
                let app = gram[p][p];
                let aqq = gram[q][q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = gram[k][p];
                    let akq = gram[k][q];
                    gram[k][p] = c * akp - s * akq;
                    gram[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = gram[p][k];
                    let aqk = gram[q][k];
                    gram[p][k] = c * apk - s * aqk;
                    gram[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let lambda_max = (0..n).map(|i| gram[i][i]).fold(0.0_f64, f64::max);
    lambda_max.max(0.0).sqrt()
}

/// Maximum relative mismatch between backpropagated and finite-difference
/// gradients of a fixed quadratic functional of the network output,
/// `L = Σ c·y + ½ Σ d·y²`, over every parameter and every input entry.
///
/// Relative error is `|a-b| / max(|a|, |b|, abs_floor)`.
pub fn gradcheck_mlp(
    net: &MLPParams,
    input: &Matrix,
    step: f64,
    abs_floor: f64,
) -> Result<f64> {
    let (out, cache) = net.forward(input, Mode::Train)?;
    // fixed pseudo-random coefficients, independent of any RNG crate
    let coeff = |k: usize| -> (f64, f64) {
        let a = ((k as f64 + 1.0) * 0.7391).sin();
        let b = ((k as f64 + 2.0) * 1.1173).cos();
        (a, 0.5 * b)
    };
    let loss_of = |y: &Matrix| -> f64 {
        let mut l = 0.0;
        for (k, &v) in y.data().iter().enumerate() {
            let (c, d) = coeff(k);
            l += c * v + d * v * v;
        }
        l
    };
    let mut upstream = out.clone();
    for (k, u) in upstream.data_mut().iter_mut().enumerate() {
        let (c, d) = coeff(k);
        *u = c + 2.0 * d * out.data()[k];
    }
    let analytic = net.backward(&cache, &upstream)?;

    let mut max_rel = 0.0_f64;
    let mut check = |a: f64, b: f64| {
        let denom = a.abs().max(b.abs()).max(abs_floor);
        max_rel = max_rel.max((a - b).abs() / denom);
    };

    // parameter gradients
    let analytic_tensors: Vec<Vec<f64>> =
        analytic.tensors().iter().map(|t| t.to_vec()).collect();
    let n_tensors = analytic_tensors.len();
    for ti in 0..n_tensors {
        let len = analytic_tensors[ti].len();
        for pi in 0..len {
            let mut probe = net.clone();
            let original = probe.param_tensors_mut()[ti][pi];
            probe.param_tensors_mut()[ti][pi] = original + step;
            let (yp, _) = probe.forward(input, Mode::Train)?;
            probe.param_tensors_mut()[ti][pi] = original - step;
            let (ym, _) = probe.forward(input, Mode::Train)?;
            let fd = (loss_of(&yp) - loss_of(&ym)) / (2.0 * step);
            check(analytic_tensors[ti][pi], fd);
        }
    }

    // input gradient
    for r in 0..input.rows() {
        for c in 0..input.cols() {
            let mut probe = input.clone();
            probe.set(r, c, input.get(r, c) + step);
            let (yp, _) = net.forward(&probe, Mode::Train)?;
            probe.set(r, c, input.get(r, c) - step);
            let (ym, _) = net.forward(&probe, Mode::Train)?;
            let fd = (loss_of(&yp) - loss_of(&ym)) / (2.0 * step);
            check(analytic.input.get(r, c), fd);
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_diagonal_spectrum() {
        let w = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((svd_spectral_norm(&w) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn numerical_gradient_of_quadratic() {
        let g = numerical_gradient(|p| p[0] * p[0] + 3.0 * p[1], &[2.0, 5.0], 1e-5);
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }
}

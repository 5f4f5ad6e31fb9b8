//! Network-level invariants: spectral-norm Lipschitz bound, batch-norm eval
//! determinism, optimizer no-ops, spectral estimates vs a dense SVD oracle,
//! and bit-exact checkpoint round-trips.

use gcfn_core::nn::{
    load_mlp, save_mlp, Activation, AdamState, LayerSpec, Matrix, MLPParams, Mode,
};
use gcfn_core::testing::svd_spectral_norm;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64, scale: f64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.gen_range(-scale..scale);
    }
    m
}

#[test]
fn power_iteration_matches_svd_oracle_on_5x5() {
    for seed in 0..12u64 {
        let w = random_matrix(5, 5, 1000 + seed, 2.0);
        let oracle = svd_spectral_norm(&w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net =
            MLPParams::build(5, &[LayerSpec::new(5, Activation::Identity).with_spectral_norm()], &mut rng)
                .unwrap();
        net.layers[0].weight = w;
        net.layers[0].spectral_normalize(300).unwrap();
        let sigma = net.layers[0].sigma_estimate();
        assert!(
            (sigma - oracle).abs() <= 1e-3 * oracle,
            "seed {seed}: power iteration {sigma} vs svd {oracle}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// With spectral normalization on every layer and 1-Lipschitz (or better)
    /// activations, the whole network contracts: ‖f(u)-f(v)‖ ≤ (1+1e-2)‖u-v‖.
    #[test]
    fn spectral_normalized_net_is_nonexpansive(
        seed in 0u64..5000,
        hidden in 2usize..=8,
        act_pick in 0usize..3,
    ) {
        let act = match act_pick {
            0 => Activation::LeakyRelu,
            1 => Activation::Identity,
            _ => Activation::Sigmoid,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = MLPParams::build(
            3,
            &[
                LayerSpec::new(hidden, Activation::LeakyRelu).with_spectral_norm(),
                LayerSpec::new(hidden, act).with_spectral_norm(),
                LayerSpec::new(2, Activation::Identity).with_spectral_norm(),
            ],
            &mut rng,
        ).unwrap();
        net.power_iterate_all(50);

        let u = random_matrix(1, 3, seed ^ 0xaaaa, 2.0);
        let v = random_matrix(1, 3, seed ^ 0xbbbb, 2.0);
        let fu = net.forward_eval(&u).unwrap();
        let fv = net.forward_eval(&v).unwrap();
        let num = fu.sub(&fv).unwrap().frobenius_norm();
        let den = u.sub(&v).unwrap().frobenius_norm();
        prop_assert!(num <= (1.0 + 1e-2) * den, "expansion {num} vs {den}");
    }

    /// Eval-mode forwards are bit-identical across calls.
    #[test]
    fn eval_forward_is_deterministic(seed in 0u64..5000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = MLPParams::build(
            4,
            &[
                LayerSpec::new(6, Activation::LeakyRelu).with_batch_norm(),
                LayerSpec::new(2, Activation::Sigmoid),
            ],
            &mut rng,
        ).unwrap();
        // push running stats away from their init so eval has something to use
        let batch = random_matrix(16, 4, seed ^ 0x1, 3.0);
        let (_, cache) = net.forward(&batch, Mode::Train).unwrap();
        net.apply_bn_updates(&cache).unwrap();

        let x = random_matrix(3, 4, seed ^ 0x2, 3.0);
        let a = net.forward_eval(&x).unwrap();
        let b = net.forward_eval(&x).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn adam_with_zero_lr_never_moves_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = MLPParams::build(
        3,
        &[
            LayerSpec::new(5, Activation::LeakyRelu).with_batch_norm(),
            LayerSpec::new(1, Activation::Sigmoid),
        ],
        &mut rng,
    )
    .unwrap();
    let before = net.clone();
    let mut adam = AdamState::new(0.0, &net);
    let x = random_matrix(8, 3, 6, 1.0);
    for _ in 0..3 {
        let (out, cache) = net.forward(&x, Mode::Train).unwrap();
        let grads = net.backward(&cache, &out).unwrap();
        adam.step(&mut net, &grads).unwrap();
    }
    assert_eq!(net.layers, before.layers);
    for (a, b) in net.batch_norms.iter().zip(&before.batch_norms) {
        if let (Some(a), Some(b)) = (a, b) {
            assert_eq!(a.gamma, b.gamma);
            assert_eq!(a.beta, b.beta);
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut net = MLPParams::build(
        4,
        &[
            LayerSpec::new(6, Activation::LeakyRelu).with_batch_norm().with_spectral_norm(),
            LayerSpec::new(3, Activation::BlockSoftmax { blocks: vec![(0, 3)] }),
        ],
        &mut rng,
    )
    .unwrap();
    let mut adam = AdamState::new(0.0005, &net);
    let x = random_matrix(8, 4, 10, 1.0);
    for _ in 0..4 {
        net.power_iterate_all(1);
        let (out, cache) = net.forward(&x, Mode::Train).unwrap();
        let grads = net.backward(&cache, &out).unwrap();
        adam.step(&mut net, &grads).unwrap();
        net.apply_bn_updates(&cache).unwrap();
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    save_mlp(&path, &net, Some(&adam)).unwrap();
    let (net2, adam2) = load_mlp(&path).unwrap();
    assert_eq!(net, net2);
    assert_eq!(Some(adam), adam2);

    // and the reloaded net computes bit-identical outputs
    let y1 = net.forward_eval(&x).unwrap();
    let y2 = net2.forward_eval(&x).unwrap();
    assert_eq!(y1, y2);
}

#[test]
fn certified_lipschitz_bounds_observed_ratios() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let net = MLPParams::build(
        3,
        &[
            LayerSpec::new(8, Activation::LeakyRelu).with_spectral_norm(),
            LayerSpec::new(1, Activation::Sigmoid).with_spectral_norm(),
        ],
        &mut rng,
    )
    .unwrap();
    let cert = net.certified_lipschitz(50).unwrap();
    assert!(cert > 0.0);
    for seed in 0..50u64 {
        let u = random_matrix(1, 3, 400 + seed, 2.0);
        let v = random_matrix(1, 3, 900 + seed, 2.0);
        let fu = net.forward_eval(&u).unwrap();
        let fv = net.forward_eval(&v).unwrap();
        let num = fu.sub(&fv).unwrap().frobenius_norm();
        let den = u.sub(&v).unwrap().frobenius_norm();
        assert!(num <= cert * den * (1.0 + 1e-9), "cert {cert} violated: {num} vs {den}");
    }
}

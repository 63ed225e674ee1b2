//! Central finite differences against the analytic batch gradient.

mod common;

use rand::Rng;
use signhash::{batch_gradients, LossConfig, ModelConfig, ModelParams, QuantizationScope, Reduction};

use common::{gradient_errors, random_batch, rng};

fn check(hidden: Vec<usize>, seed: u64, loss: LossConfig) {
    let config = ModelConfig {
        embed_dim: 4,
        hidden_dims: hidden,
        code_len: 4,
        seed,
    };
    let mut r = rng(seed);
    let mut params = ModelParams::init(10, &config).unwrap();
    params.virtual_code = (0..4).map(|_| r.gen_range(-0.5..0.5)).collect();
    let batch = random_batch(&mut r, 10, 5, 3);
    for (t, e) in gradient_errors(&params, &batch, &loss, 1e-5).iter().enumerate() {
        assert!(*e < 1e-4, "tensor {t}: relative error {e}");
    }
}

const LOSS: LossConfig = LossConfig {
    delta: 2.0,
    delta0: 1.0,
    eta: 0.7,
    alpha: 0.05,
    quantization: QuantizationScope::Batch,
    reduction: Reduction::Mean,
};

#[test]
fn single_hidden_layer_matches_finite_differences() {
    check(vec![6], 21, LOSS);
}

#[test]
fn summed_loss_with_full_quantization_matches_finite_differences() {
    check(
        vec![6, 5],
        8,
        LossConfig {
            quantization: QuantizationScope::Full,
            reduction: Reduction::Sum,
            ..LOSS
        },
    );
}

#[test]
fn quantization_gradient_is_linear_in_eta() {
    let config = ModelConfig {
        embed_dim: 4,
        hidden_dims: vec![6, 6],
        code_len: 4,
        seed: 2,
    };
    let mut r = rng(2);
    let params = ModelParams::init(8, &config).unwrap();
    let batch = random_batch(&mut r, 8, 4, 2);
    let base = LossConfig {
        eta: 0.0,
        alpha: 0.0,
        ..LOSS
    };
    let g = |eta: f64| {
        batch_gradients(&batch, &params, &LossConfig { eta, ..base })
            .unwrap()
            .1
            .to_dense(8)
    };
    let (g0, g1, g2) = (g(0.0), g(0.5), g(1.0));
    for t in 0..g0.len() {
        for e in 0..g0[t].len() {
            let q1 = g1[t][e] - g0[t][e];
            let q2 = g2[t][e] - g0[t][e];
            assert!((q2 - 2.0 * q1).abs() < 1e-9 * (1.0 + q2.abs()));
        }
    }
}

use moldline_nn::gradcheck::{check_layer, check_loss, check_lstm, check_network, CheckReport};
use moldline_nn::layers::{DropoutSemantics, InitScheme, Layer, LayerSpec, Padding};
use moldline_nn::loss::Loss;
use moldline_nn::lstm::{LstmNetwork, LstmSpec};
use moldline_nn::network::{Network, NetworkSpec};
use moldline_nn::optim::OptimizerSpec;
use moldline_nn::{rng, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const INSTANCES: u64 = 20;

fn random_tensor(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut r = rng::named(seed, "input");
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn layer(spec: LayerSpec, sample_shape: &[usize], seed: u64) -> Layer {
    let mut r = rng::named(seed, "init");
    Layer::build(&spec, sample_shape, InitScheme::Normal { std: 0.5 }, DropoutSemantics::Keep, &mut r).unwrap()
}

fn assert_ok(what: &str, seed: u64, rep: CheckReport) {
    assert!(rep.max() < TOL, "{what} seed {seed}: {rep:?}");
}

#[test]
fn dense() {
    for seed in 0..INSTANCES {
        let mut l = layer(LayerSpec::Dense { units: 4 }, &[5], seed);
        let x = random_tensor(vec![3, 5], seed);
        assert_ok("dense", seed, check_layer(&mut l, &x, seed, H).unwrap());
    }
}

#[test]
fn conv2d() {
    let variants = [(1, Padding::Same), (2, Padding::Same), (1, Padding::Valid), (2, Padding::Valid)];
    for seed in 0..INSTANCES {
        let (stride, padding) = variants[seed as usize % variants.len()];
        let spec = LayerSpec::Conv2d { filters: 3, kernel: 3, stride, padding };
        let mut l = layer(spec, &[6, 7, 2], seed);
        let x = random_tensor(vec![2, 6, 7, 2], seed);
        assert_ok("conv2d", seed, check_layer(&mut l, &x, seed, H).unwrap());
    }
}

#[test]
fn maxpool_away_from_ties() {
    for seed in 0..INSTANCES {
        let mut l = layer(LayerSpec::MaxPool { size: 2, stride: 2 }, &[6, 6, 2], seed);
        // Distinct values at least 0.01 apart so no perturbation flips an argmax.
        let mut r = rng::named(seed, "input");
        let mut vals: Vec<f64> = (0..144).map(|i| i as f64 * 0.01 - 0.72).collect();
        vals.shuffle(&mut r);
        let x = Tensor::new(vec![2, 6, 6, 2], vals).unwrap();
        assert_ok("maxpool", seed, check_layer(&mut l, &x, seed, H).unwrap());
    }
}

#[test]
fn relu_away_from_zero() {
    for seed in 0..INSTANCES {
        let mut l = layer(LayerSpec::Relu, &[10], seed);
        let mut x = random_tensor(vec![3, 10], seed);
        for v in x.data_mut() {
            if v.abs() < 1e-2 {
                *v += 2e-2_f64.copysign(*v);
            }
        }
        assert_ok("relu", seed, check_layer(&mut l, &x, seed, H).unwrap());
    }
}

#[test]
fn dropout_with_fixed_mask() {
    for seed in 0..INSTANCES {
        let mut l = layer(LayerSpec::Dropout { rate: 0.6 }, &[8], seed);
        let x = random_tensor(vec![4, 8], seed);
        assert_ok("dropout", seed, check_layer(&mut l, &x, seed, H).unwrap());
    }
}

#[test]
fn losses() {
    for seed in 0..INSTANCES {
        let mut r = rng::named(seed, "loss");
        let target: Vec<f64> = (0..9).map(|_| r.random_range(-2.0..2.0)).collect();
        // Residuals kept away from the kinks of L1 (0) and Huber (±delta).
        let pred: Vec<f64> = target
            .iter()
            .map(|t| {
                let mag = r.random_range(0.05..1.5);
                let mag = if (mag - 0.7_f64).abs() < 0.02 { mag + 0.05 } else { mag };
                t + if r.random_bool(0.5) { mag } else { -mag }
            })
            .collect();
        for loss in [Loss::L1, Loss::Mse, Loss::Rmse, Loss::Huber { delta: 0.7 }] {
            let err = check_loss(loss, &pred, &target, H);
            assert!(err < TOL, "{loss:?} seed {seed}: {err}");
        }
    }
}

fn small_cnn() -> NetworkSpec {
    NetworkSpec {
        name: "small".into(),
        input_shape: vec![8, 8, 1],
        layers: vec![
            LayerSpec::Conv2d { filters: 2, kernel: 3, stride: 1, padding: Padding::Same },
            LayerSpec::Relu,
            LayerSpec::MaxPool { size: 2, stride: 2 },
            LayerSpec::Conv2d { filters: 3, kernel: 3, stride: 1, padding: Padding::Same },
            LayerSpec::Relu,
            LayerSpec::MaxPool { size: 2, stride: 2 },
            LayerSpec::Flatten { expect: Some(12) },
            LayerSpec::Dense { units: 5 },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: 0.8 },
            LayerSpec::Dense { units: 1 },
        ],
        loss: Loss::L1,
        optimizer: OptimizerSpec::adam_default(),
        init: InitScheme::Normal { std: 0.5 },
        dropout: DropoutSemantics::Keep,
    }
}

#[test]
fn chained_network() {
    // Kinks in ReLU/max-pool can land inside the ±h stencil on a random
    // draw; every seed here is checked and must pass.
    for seed in 0..INSTANCES {
        let mut net = Network::new(small_cnn(), seed).unwrap();
        let x = random_tensor(vec![2, 8, 8, 1], seed);
        assert_ok("network", seed, check_network(&mut net, &x, seed, H).unwrap());
    }
}

fn lstm(layers: usize, seed: u64) -> LstmNetwork {
    let mut spec = LstmSpec::new(3, layers);
    spec.hidden_size = 4;
    spec.init_std = 0.5;
    LstmNetwork::new(spec, seed).unwrap()
}

#[test]
fn lstm_bptt_one_layer() {
    for seed in 0..INSTANCES {
        let mut net = lstm(1, seed);
        let x = random_tensor(vec![2, 5, 3], seed);
        assert_ok("lstm1", seed, check_lstm(&mut net, &x, seed, H).unwrap());
    }
}

#[test]
fn lstm_bptt_two_layers() {
    for seed in 0..INSTANCES {
        let mut net = lstm(2, seed);
        let x = random_tensor(vec![2, 4, 3], seed);
        assert_ok("lstm2", seed, check_lstm(&mut net, &x, seed, H).unwrap());
    }
}

/// For a length-1 sequence with zero initial state, `c = i ⊙ g` and
/// `h = o ⊙ tanh(c)`, so the gradient of `pred = w·h + b` w.r.t. the gate
/// biases has a closed form.
#[test]
fn lstm_single_step_matches_closed_form() {
    let sigmoid = |z: f64| 1.0 / (1.0 + (-z).exp());
    for seed in 0..INSTANCES {
        let mut net = lstm(1, seed);
        let x = random_tensor(vec![1, 1, 3], seed);
        let hs = 4;
        let (wx, bias) = (net.layers[0].wx.value.data().to_vec(), net.layers[0].bias.value.data().to_vec());
        let w = net.head_w.value.data().to_vec();
        let z: Vec<f64> = (0..4 * hs).map(|r| bias[r] + (0..3).map(|c| wx[r * 3 + c] * x.data()[c]).sum::<f64>()).collect();
        let mut expected = vec![0.0; 4 * hs];
        for j in 0..hs {
            let (i, g, o) = (sigmoid(z[j]), z[2 * hs + j].tanh(), sigmoid(z[3 * hs + j]));
            let c = i * g;
            let dh = w[j];
            let dc = dh * o * (1.0 - c.tanh().powi(2));
            expected[j] = dc * g * i * (1.0 - i);
            // The forget gate multiplies c_0 = 0, so its gradient vanishes.
            expected[hs + j] = 0.0;
            expected[2 * hs + j] = dc * i * (1.0 - g * g);
            expected[3 * hs + j] = dh * c.tanh() * o * (1.0 - o);
        }
        net.forward(&x).unwrap();
        net.params_mut().iter_mut().for_each(|p| p.zero_grad());
        net.backward(&[1.0]);
        let got = &net.layers[0].bias.grad;
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "seed {seed}: {got:?} vs {expected:?}");
        }
    }
}

//! Shared helpers: an independent scalar LSTM forward pass and a
//! finite-difference gradient check built on it.

#![allow(dead_code)]

use loadcast::features::ScalerParams;
use loadcast::lstm::{Architecture, Gate, LstmModel, Mode};
use loadcast::series::Resolution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Plain-loop forward pass with no dropout, written independently of the
/// library's matrix code.
pub fn reference_predict(model: &LstmModel, window: &[Vec<f64>]) -> f64 {
    let mut inputs: Vec<Vec<f64>> = window.to_vec();
    for layer in &model.layers {
        let hsz = layer.hidden_size();
        let (wf, wi, wc, wo) = (
            layer.gate_weights(Gate::Forget),
            layer.gate_weights(Gate::Input),
            layer.gate_weights(Gate::Candidate),
            layer.gate_weights(Gate::Output),
        );
        let (bf, bi, bc, bo) = (
            layer.gate_bias(Gate::Forget),
            layer.gate_bias(Gate::Input),
            layer.gate_bias(Gate::Candidate),
            layer.gate_bias(Gate::Output),
        );
        let mut h = vec![0.0; hsz];
        let mut c = vec![0.0; hsz];
        let mut outputs = Vec::with_capacity(inputs.len());
        for x in &inputs {
            let z: Vec<f64> = h.iter().chain(x.iter()).copied().collect();
            let affine = |w: &ndarray::ArrayView2<f64>, b: &ndarray::ArrayView1<f64>, u: usize| {
                b[u] + z
                    .iter()
                    .enumerate()
                    .map(|(k, v)| w[[u, k]] * v)
                    .sum::<f64>()
            };
            let mut h_new = vec![0.0; hsz];
            for u in 0..hsz {
                let f = sigmoid(affine(&wf, &bf, u));
                let i = sigmoid(affine(&wi, &bi, u));
                let g = affine(&wc, &bc, u).tanh();
                let o = sigmoid(affine(&wo, &bo, u));
                c[u] = f * c[u] + i * g;
                h_new[u] = o * c[u].tanh();
            }
            h = h_new;
            outputs.push(h.clone());
        }
        inputs = outputs;
    }
    let top = inputs.last().unwrap();
    model.head.bias
        + top
            .iter()
            .zip(model.head.weights.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
}

pub fn small_model(
    num_layers: usize,
    hidden: usize,
    inputs: usize,
    lookback: usize,
    seed: u64,
) -> LstmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scaler = ScalerParams {
        means: vec![0.0; inputs],
        stds: vec![1.0; inputs],
    };
    let arch = Architecture {
        num_layers,
        hidden_size: hidden,
        dropout_rate: 0.0,
    };
    let mut model = LstmModel::init(arch, scaler, lookback, Resolution::Daily, &mut rng).unwrap();
    // Move away from the init so every gate is exercised.
    for layer in &mut model.layers {
        for g in Gate::ALL {
            layer
                .gate_bias_mut(g)
                .iter_mut()
                .for_each(|b| *b += rng.gen_range(-0.5..0.5));
        }
    }
    model.head.bias = rng.gen_range(-0.5..0.5);
    model
}

pub fn random_windows(
    n: usize,
    lookback: usize,
    inputs: usize,
    seed: u64,
) -> (Vec<Vec<Vec<f64>>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let windows = (0..n)
        .map(|_| {
            (0..lookback)
                .map(|_| (0..inputs).map(|_| rng.gen_range(-1.5..1.5)).collect())
                .collect()
        })
        .collect();
    let targets = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (windows, targets)
}

fn loss(model: &LstmModel, windows: &[Vec<Vec<f64>>], targets: &[f64]) -> f64 {
    windows
        .iter()
        .zip(targets)
        .map(|(w, y)| 0.5 * (reference_predict(model, w) - y).powi(2))
        .sum()
}

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-9 {
        (a - n).abs()
    } else {
        (a - n).abs() / scale
    }
}

/// Largest relative error between analytic BPTT gradients and central
/// differences (step `h`) of the reference loss, over every parameter.
pub fn max_gradient_error(
    model: &LstmModel,
    windows: &[Vec<Vec<f64>>],
    targets: &[f64],
    h: f64,
) -> (f64, usize) {
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let batch: Vec<&[Vec<f64>]> = windows.iter().map(|w| w.as_slice()).collect();
    let (preds, cache) = model
        .forward_batch(&batch, Mode::Infer, &mut unused)
        .unwrap();
    let dl: Vec<f64> = preds.iter().zip(targets).map(|(p, y)| p - y).collect();
    let grads = model.backward(&cache, &dl).unwrap();

    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut m = model.clone();
    let mut probe = |m: &mut LstmModel, p: Param, analytic: f64| {
        let orig = p.get(m);
        p.set(m, orig + h);
        let up = loss(m, windows, targets);
        p.set(m, orig - h);
        let down = loss(m, windows, targets);
        p.set(m, orig);
        worst = worst.max(rel_err(analytic, (up - down) / (2.0 * h)));
        checked += 1;
    };

    for (l, layer) in model.layers.iter().enumerate() {
        let hsz = layer.hidden_size();
        for (gi, &g) in Gate::ALL.iter().enumerate() {
            let (rows, cols) = layer.gate_weights(g).dim();
            for r in 0..rows {
                for c in 0..cols {
                    probe(
                        &mut m,
                        Param::Weight(l, g, r, c),
                        grads.layers[l].weights[[gi * hsz + r, c]],
                    );
                }
                probe(
                    &mut m,
                    Param::Bias(l, g, r),
                    grads.layers[l].bias[gi * hsz + r],
                );
            }
        }
    }
    for k in 0..model.head.weights.len() {
        probe(&mut m, Param::HeadWeight(k), grads.head_weights[k]);
    }
    probe(&mut m, Param::HeadBias, grads.head_bias);
    (worst, checked)
}

#[derive(Clone, Copy)]
enum Param {
    Weight(usize, Gate, usize, usize),
    Bias(usize, Gate, usize),
    HeadWeight(usize),
    HeadBias,
}

impl Param {
    fn get(self, m: &LstmModel) -> f64 {
        match self {
            Param::Weight(l, g, r, c) => m.layers[l].gate_weights(g)[[r, c]],
            Param::Bias(l, g, r) => m.layers[l].gate_bias(g)[r],
            Param::HeadWeight(k) => m.head.weights[k],
            Param::HeadBias => m.head.bias,
        }
    }

    fn set(self, m: &mut LstmModel, v: f64) {
        match self {
            Param::Weight(l, g, r, c) => m.layers[l].gate_weights_mut(g)[[r, c]] = v,
            Param::Bias(l, g, r) => m.layers[l].gate_bias_mut(g)[r] = v,
            Param::HeadWeight(k) => m.head.weights[k] = v,
            Param::HeadBias => m.head.bias = v,
        }
    }
}

//! Central finite-difference checks of the hand-written gradients, at f64.
//!
//! Each check draws a random instance from `seed`, builds the scalar objective
//! `L = sum(r * layer(x))` for a random projection `r` (cross-entropy for the
//! softmax head) and returns the largest relative error between the analytic
//! and numerical gradients over every input and parameter coordinate.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::nn::network::{LayerSpec, Network, NetworkSpec, ParameterSet};
use crate::nn::ops::{self, Conv1dGeometry, Mode};
use crate::nn::{ForwardCache, InputShape, Tensor};
use crate::rng::{seeded, DetRng};

pub const FD_STEP: f64 = 1e-4;
/// Denominator floor so that coordinates where both gradients vanish compare as equal.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv1d,
    Dense,
    Maxpool1d,
    LeakyRelu,
    Dropout,
    SoftmaxCrossEntropy,
}

impl LayerKind {
    pub const ALL: [LayerKind; 6] = [
        LayerKind::Conv1d,
        LayerKind::Dense,
        LayerKind::Maxpool1d,
        LayerKind::LeakyRelu,
        LayerKind::Dropout,
        LayerKind::SoftmaxCrossEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv1d => "conv1d",
            LayerKind::Dense => "dense",
            LayerKind::Maxpool1d => "maxpool1d",
            LayerKind::LeakyRelu => "leaky_relu",
            LayerKind::Dropout => "dropout",
            LayerKind::SoftmaxCrossEntropy => "softmax_cross_entropy",
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn normal(rng: &mut DetRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn tensor(rng: &mut DetRng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, normal(rng, n)).expect("extent matches")
}

/// Values `gap` apart, none at zero, in random order: no sample sits near a kink or a tie.
fn separated(rng: &mut DetRng, shape: Vec<usize>, gap: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0 + 0.3) * gap).collect();
    for i in (1..n).rev() {
        v.swap(i, rng.random_range(0..=i));
    }
    Tensor::new(shape, v).expect("extent matches")
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Largest relative error of `analytic` against central differences of `f` around `x`.
fn compare(x: &Tensor<f64>, analytic: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> Result<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + FD_STEP;
        let up = f(&probe)?;
        probe.data_mut()[i] = orig - FD_STEP;
        let down = f(&probe)?;
        probe.data_mut()[i] = orig;
        worst = worst.max(relative_error(analytic.data()[i], (up - down) / (2.0 * FD_STEP)));
    }
    Ok(worst)
}

/// Maximum relative error for one random instance of `kind`.
pub fn check_layer(kind: LayerKind, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    match kind {
        LayerKind::Conv1d => {
            let c_in = rng.random_range(1..=3);
            let len = rng.random_range(5..=12);
            let k = rng.random_range(1..=4);
            let geom = Conv1dGeometry {
                in_channels: c_in,
                out_channels: rng.random_range(1..=4),
                kernel_size: k,
                stride: rng.random_range(1..=2),
                padding: rng.random_range(0..k),
            };
            let x = tensor(&mut rng, vec![c_in, len]);
            let w = tensor(&mut rng, geom.weight_shape());
            let b = tensor(&mut rng, vec![geom.out_channels]);
            let out_len = geom.output_len(len)?;
            let r = tensor(&mut rng, vec![geom.out_channels, out_len]);
            let (gx, gw, gb) = ops::conv1d_backward(&x, &geom, &w, &r)?;
            let ex = compare(&x, &gx, |x| Ok(dot(&ops::conv1d_forward(x, &geom, &w, &b)?, &r)))?;
            let ew = compare(&w, &gw, |w| Ok(dot(&ops::conv1d_forward(&x, &geom, w, &b)?, &r)))?;
            let eb = compare(&b, &gb, |b| Ok(dot(&ops::conv1d_forward(&x, &geom, &w, b)?, &r)))?;
            Ok(ex.max(ew).max(eb))
        }
        LayerKind::Dense => {
            let (n_in, n_out) = (rng.random_range(1..=20), rng.random_range(1..=6));
            let x = tensor(&mut rng, vec![n_in]);
            let w = tensor(&mut rng, vec![n_out, n_in]);
            let b = tensor(&mut rng, vec![n_out]);
            let r = tensor(&mut rng, vec![n_out]);
            let (gx, gw, gb) = ops::dense_backward(&x, &w, &r)?;
            let ex = compare(&x, &gx, |x| Ok(dot(&ops::dense_forward(x, &w, &b)?, &r)))?;
            let ew = compare(&w, &gw, |w| Ok(dot(&ops::dense_forward(&x, w, &b)?, &r)))?;
            let eb = compare(&b, &gb, |b| Ok(dot(&ops::dense_forward(&x, &w, b)?, &r)))?;
            Ok(ex.max(ew).max(eb))
        }
        LayerKind::Maxpool1d => {
            let (window, stride) = (rng.random_range(1..=3), rng.random_range(1..=3));
            let shape = vec![rng.random_range(1..=3), rng.random_range(window..=window + 10)];
            let x = separated(&mut rng, shape, 0.01);
            let (y, argmax) = ops::maxpool1d_forward(&x, window, stride)?;
            let r = tensor(&mut rng, y.shape().to_vec());
            let gx = ops::maxpool1d_backward(x.shape(), &argmax, &r)?;
            compare(&x, &gx, |x| Ok(dot(&ops::maxpool1d_forward(x, window, stride)?.0, &r)))
        }
        LayerKind::LeakyRelu => {
            let alpha = rng.random_range(0.01..0.99);
            let shape = vec![rng.random_range(1..=3), rng.random_range(2..=20)];
            let x = separated(&mut rng, shape, 0.01);
            let r = tensor(&mut rng, x.shape().to_vec());
            let gx = ops::leaky_relu_backward(&x, alpha, &r)?;
            compare(&x, &gx, |x| Ok(dot(&ops::leaky_relu(x, alpha)?, &r)))
        }
        LayerKind::Dropout => {
            let rate = rng.random_range(0.05..0.6);
            let mask_seed: u64 = rng.random();
            let shape = vec![rng.random_range(1..=3), rng.random_range(2..=20)];
            let x = tensor(&mut rng, shape);
            let r = tensor(&mut rng, x.shape().to_vec());
            let apply = |x: &Tensor<f64>| ops::dropout_apply(x, rate, Mode::Train, &mut seeded(mask_seed));
            let (_, mask) = apply(&x)?;
            let gx = ops::dropout_backward(mask.as_deref(), &r)?;
            compare(&x, &gx, |x| Ok(dot(&apply(x)?.0, &r)))
        }
        LayerKind::SoftmaxCrossEntropy => {
            let n = rng.random_range(2..=6);
            let label = rng.random_range(0..n);
            let z = Tensor::from_vec(normal(&mut rng, n).into_iter().map(|v| 3.0 * v).collect());
            let g = Tensor::from_vec(ops::softmax_cross_entropy_grad(&ops::softmax(z.data())?, label)?);
            compare(&z, &g, |z| ops::cross_entropy(&ops::softmax(z.data())?, label))
        }
    }
}

/// A small conv/pool/dropout/dense stack over a `[2, 12]` input.
pub fn small_network_spec() -> NetworkSpec {
    NetworkSpec {
        input: InputShape { channels: 2, length: 12 },
        layers: vec![
            LayerSpec::conv1d(2, 3, 3, 1),
            LayerSpec::LeakyRelu { alpha: 0.1 },
            LayerSpec::Maxpool1d { window: 2, stride: 2 },
            LayerSpec::Dropout { rate: 0.25 },
            LayerSpec::conv1d(3, 4, 3, 1),
            LayerSpec::LeakyRelu { alpha: 0.1 },
            LayerSpec::Maxpool1d { window: 2, stride: 2 },
            LayerSpec::Flatten,
            LayerSpec::dense(12, 2),
            LayerSpec::Softmax,
        ],
    }
}

fn param_values(net: &mut Network<f64>, layer: usize, which: usize) -> &mut [f64] {
    let p = net.params_mut().get_mut(layer).expect("param layer");
    if which == 0 { p.weight.data_mut() } else { p.bias.data_mut() }
}

/// Whole-network check of every parameter gradient under one fixed dropout mask.
pub fn check_network(spec: &NetworkSpec, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let params = ParameterSet::<f64>::init(spec, &mut rng)?;
    let x = tensor(&mut rng, vec![spec.input.channels, spec.input.length]);
    let label = rng.random_range(0..spec.output_len()?);
    let mask_seed: u64 = rng.random();
    let loss = |net: &Network<f64>| -> Result<f64> {
        let mut cache = ForwardCache::default();
        let p = net.forward_train(&x, &mut seeded(mask_seed), &mut cache)?;
        ops::cross_entropy(&p, label)
    };
    let mut net = Network::new(spec.clone(), params)?;
    let mut cache = ForwardCache::default();
    net.forward_train(&x, &mut seeded(mask_seed), &mut cache)?;
    let grads = net.backward(&cache, label)?;

    let mut worst = 0.0f64;
    let layers: Vec<usize> = net.params().iter().map(|(i, _)| i).collect();
    for layer in layers {
        for which in 0..2 {
            let analytic = grads.get(layer).expect("param layer");
            let analytic = if which == 0 { &analytic.weight } else { &analytic.bias };
            for j in 0..analytic.len() {
                let orig = param_values(&mut net, layer, which)[j];
                param_values(&mut net, layer, which)[j] = orig + FD_STEP;
                let up = loss(&net)?;
                param_values(&mut net, layer, which)[j] = orig - FD_STEP;
                let down = loss(&net)?;
                param_values(&mut net, layer, which)[j] = orig;
                worst = worst.max(relative_error(analytic.data()[j], (up - down) / (2.0 * FD_STEP)));
            }
        }
    }
    Ok(worst)
}

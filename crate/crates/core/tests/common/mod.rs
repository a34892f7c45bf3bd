//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use tftb::budget::VirtualClock;
use tftb::data::{Dataset, Split, SynthClassification};
use tftb::loss::{loss_and_grad, LossKind, Targets};
use tftb::model::{Architecture, ModelParams};
use tftb::tensor::Tensor;
use tftb::trainer::{train_with_clock, TrainConfig, TrainOutcome};

/// Top-`k` ids by descending score, ties by ascending id, via a full sort.
pub fn brute_force_top_k(scores: &[(u64, f64)], k: usize) -> Vec<u64> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut ids: Vec<u64> = v.into_iter().take(k).map(|p| p.0).collect();
    ids.sort_unstable();
    ids
}

/// `round_half_up(n * (1 - permille / 1000))` in integer arithmetic.
pub fn retained_oracle(n: u64, alpha_permille: u64) -> u64 {
    (2 * n * (1000 - alpha_permille) + 1000) / 2000
}

/// Direct 2-D Gaussian sum, each point renormalised to unit in-map mass.
pub fn density_oracle(width: usize, height: usize, points: &[(f64, f64)], sigma: f64) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for &(x, y) in points {
        let mut k = vec![0.0; width * height];
        let mut total = 0.0;
        for i in 0..height {
            for j in 0..width {
                let d2 = (j as f64 - x).powi(2) + (i as f64 - y).powi(2);
                let v = (-d2 / (2.0 * sigma * sigma)).exp();
                k[i * width + j] = v;
                total += v;
            }
        }
        for (o, v) in out.iter_mut().zip(&k) {
            *o += v / total;
        }
    }
    out
}

pub fn mlp(input_dim: usize, hidden: Vec<usize>, num_classes: usize) -> Architecture {
    Architecture::Mlp {
        input_dim,
        hidden,
        num_classes,
    }
}

pub fn conv(size: usize, channels: [usize; 2]) -> Architecture {
    Architecture::DensityConv {
        in_channels: 1,
        height: size,
        width: size,
        channels,
        kernel: 3,
    }
}

/// Small classification split with a carved validation set.
pub fn small_task(seed: u64, n_per_class: usize) -> (Dataset, Dataset, Dataset) {
    let g = SynthClassification::new(seed, n_per_class, 4, 0.6);
    let train = g.generate(Split::Train).unwrap();
    let test = g.generate(Split::Test).unwrap();
    let (train, val) = train.carve(0.1, seed, Split::Val).unwrap();
    (train, val, test)
}

pub fn train_virtual(
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
    clock: &mut VirtualClock,
) -> tftb::Result<TrainOutcome> {
    let arch = mlp(train.feature_shape()[0], vec![8], train.num_classes());
    train_with_clock(ModelParams::init(arch, cfg.seed)?, train, val, cfg, clock)
}

/// Replace every parameter, biases included, with a uniform draw from
/// `[-scale, scale]`. Zero biases can park ReLU inputs exactly on the kink,
/// where finite differences disagree with any one-sided derivative.
pub fn randomize(params: &mut ModelParams, seed: u64, scale: f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = rng.random_range(-scale..scale);
        }
    }
}

/// Largest relative error between the analytic gradient and central
/// differences of the mean loss, over every parameter.
pub fn max_gradient_error(
    params: &ModelParams,
    batch: &Tensor,
    targets: &Targets,
    kind: LossKind,
    h: f64,
) -> f64 {
    let analytic = loss_and_grad(params, batch, targets, kind).unwrap().gradients;
    let grads: Vec<Vec<f64>> = analytic.tensors().map(|t| t.data().to_vec()).collect();
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for (ti, g) in grads.iter().enumerate() {
        for (k, &a) in g.iter().enumerate() {
            let orig = probe.tensors_mut().nth(ti).unwrap().data()[k];
            probe.tensors_mut().nth(ti).unwrap().data_mut()[k] = orig + h;
            let up = loss_and_grad(&probe, batch, targets, kind).unwrap().mean_loss;
            probe.tensors_mut().nth(ti).unwrap().data_mut()[k] = orig - h;
            let down = loss_and_grad(&probe, batch, targets, kind).unwrap().mean_loss;
            probe.tensors_mut().nth(ti).unwrap().data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

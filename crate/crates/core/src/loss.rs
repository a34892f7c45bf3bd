//! Per-sample losses and the gradient of their batch mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    PixelwiseL2,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::PixelwiseL2 => "pixelwise_l2",
        }
    }
}

/// Batch targets: class indices for classification, density maps `(B, H, W)` for regression.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Maps(Tensor),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Maps(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct LossBatchResult {
    pub per_sample_losses: Vec<f64>,
    pub mean_loss: f64,
    pub gradients: Gradients,
}

/// Loss value and gradient w.r.t. the model output, per batch.
struct OutputLoss {
    per_sample: Vec<f64>,
    d_output: Vec<f64>,
}

fn output_loss(
    output: &Tensor,
    targets: &Targets,
    kind: LossKind,
    want_grad: bool,
) -> Result<OutputLoss> {
    let n = output.rows();
    if targets.len() != n {
        return Err(Error::ShapeMismatch {
            context: "loss targets",
            expected: vec![n],
            actual: vec![targets.len()],
        });
    }
    let mut per_sample = Vec::with_capacity(n);
    let mut d_output = if want_grad {
        vec![0.0; output.len()]
    } else {
        Vec::new()
    };
    let scale = 1.0 / n as f64;
    match (kind, targets) {
        (LossKind::CrossEntropy, Targets::Classes(classes)) => {
            let c = output.row_len();
            for (s, &t) in classes.iter().enumerate() {
                if t >= c {
                    return Err(Error::invalid(format!(
                        "class index {t} out of range for {c} classes"
                    )));
                }
                let z = output.row(s);
                let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum_exp: f64 = z.iter().map(|v| (v - max).exp()).sum();
                let lse = max + sum_exp.ln();
                per_sample.push(lse - z[t]);
                if want_grad {
                    let d = &mut d_output[s * c..(s + 1) * c];
                    for (j, dj) in d.iter_mut().enumerate() {
                        let p = (z[j] - lse).exp();
                        *dj = scale * (p - if j == t { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        (LossKind::PixelwiseL2, Targets::Maps(maps)) => {
            if maps.shape() != output.shape() {
                return Err(Error::ShapeMismatch {
                    context: "density targets",
                    expected: output.shape().to_vec(),
                    actual: maps.shape().to_vec(),
                });
            }
            let p = output.row_len();
            for s in 0..n {
                let pred = output.row(s);
                let gt = maps.row(s);
                let mut acc = 0.0;
                for (a, b) in pred.iter().zip(gt) {
                    acc += (a - b) * (a - b);
                }
                per_sample.push(acc / p as f64);
                if want_grad {
                    let d = &mut d_output[s * p..(s + 1) * p];
                    for ((dj, a), b) in d.iter_mut().zip(pred).zip(gt) {
                        *dj = scale * 2.0 * (a - b) / p as f64;
                    }
                }
            }
        }
        (kind, _) => {
            return Err(Error::invalid(format!(
                "targets do not match loss kind {}",
                kind.name()
            )))
        }
    }
    if let Some(position) = per_sample.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFiniteLoss { position });
    }
    Ok(OutputLoss {
        per_sample,
        d_output,
    })
}

/// Forward + backward for one batch.
///
/// The gradient is that of `mean_loss`, the arithmetic mean of the per-sample
/// losses. For `PixelwiseL2` each per-sample loss is the mean squared pixel
/// difference of that sample's density map.
pub fn loss_and_grad(
    params: &ModelParams,
    batch: &Tensor,
    targets: &Targets,
    kind: LossKind,
) -> Result<LossBatchResult> {
    let (output, cache) = params.forward_cached(batch)?;
    let ol = output_loss(&output, targets, kind, true)?;
    let gradients = params.backward(batch, &cache, &ol.d_output);
    for t in gradients.tensors() {
        t.ensure_finite("gradient")?;
    }
    let mean_loss = mean(&ol.per_sample);
    Ok(LossBatchResult {
        per_sample_losses: ol.per_sample,
        mean_loss,
        gradients,
    })
}

/// Forward-only per-sample losses (evaluation and score refresh).
pub fn per_sample_losses(
    params: &ModelParams,
    batch: &Tensor,
    targets: &Targets,
    kind: LossKind,
) -> Result<Vec<f64>> {
    let output = params.forward(batch)?;
    Ok(output_loss(&output, targets, kind, false)?.per_sample)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

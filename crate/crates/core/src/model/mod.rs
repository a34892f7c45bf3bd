//! The two fixed model families and their parameter containers.
//!
//! * [`Architecture::Mlp`]: fully connected ReLU network with a linear
//!   logits head (softmax is applied by the loss).
//! * [`Architecture::DensityConv`]: two same-padded `k x k` ReLU convolutions
//!   followed by a `1 x 1` convolution producing one density value per pixel.
//!
//! Forward and backward passes are written out by hand; there is no graph.

mod conv;
mod mlp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Mlp {
        input_dim: usize,
        hidden: Vec<usize>,
        num_classes: usize,
    },
    DensityConv {
        in_channels: usize,
        height: usize,
        width: usize,
        channels: [usize; 2],
        kernel: usize,
    },
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        match self {
            Architecture::Mlp {
                input_dim,
                hidden,
                num_classes,
            } => {
                if *input_dim == 0 || *num_classes < 2 || hidden.contains(&0) {
                    return Err(Error::invalid(format!("degenerate MLP architecture {self:?}")));
                }
            }
            Architecture::DensityConv {
                in_channels,
                height,
                width,
                channels,
                kernel,
            } => {
                if *in_channels == 0
                    || *height == 0
                    || *width == 0
                    || channels.contains(&0)
                    || kernel % 2 == 0
                {
                    return Err(Error::invalid(format!(
                        "degenerate conv architecture {self:?} (kernel must be odd)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Per-example input shape (without the batch axis).
    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            Architecture::Mlp { input_dim, .. } => vec![*input_dim],
            Architecture::DensityConv {
                in_channels,
                height,
                width,
                ..
            } => vec![*in_channels, *height, *width],
        }
    }

    /// Per-example output shape (without the batch axis).
    pub fn output_shape(&self) -> Vec<usize> {
        match self {
            Architecture::Mlp { num_classes, .. } => vec![*num_classes],
            Architecture::DensityConv { height, width, .. } => vec![*height, *width],
        }
    }

    /// `(weight shape, bias shape)` of every layer, in order.
    pub fn layer_shapes(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        match self {
            Architecture::Mlp {
                input_dim,
                hidden,
                num_classes,
            } => {
                let mut dims = vec![*input_dim];
                dims.extend_from_slice(hidden);
                dims.push(*num_classes);
                dims.windows(2)
                    .map(|w| (vec![w[1], w[0]], vec![w[1]]))
                    .collect()
            }
            Architecture::DensityConv {
                in_channels,
                channels,
                kernel,
                ..
            } => vec![
                (vec![channels[0], *in_channels, *kernel, *kernel], vec![channels[0]]),
                (vec![channels[1], channels[0], *kernel, *kernel], vec![channels[1]]),
                (vec![1, channels[1], 1, 1], vec![1]),
            ],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    arch: Architecture,
    layers: Vec<Layer>,
}

/// Gradient of the batch-mean loss; mirrors the layer layout of [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Tensor::zeros(l.weight.shape()),
                    bias: Tensor::zeros(l.bias.shape()),
                })
                .collect(),
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .flat_map(|t| t.data().iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl ModelParams {
    /// All weights and biases zero.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(w, b)| Layer {
                weight: Tensor::zeros(&w),
                bias: Tensor::zeros(&b),
            })
            .collect();
        Ok(ModelParams { arch, layers })
    }

    /// He-normal weights, zero biases, deterministic in `seed`.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut params.layers {
            let fan_in: usize = layer.weight.shape()[1..].iter().product();
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                .map_err(|e| Error::invalid(e.to_string()))?;
            for w in layer.weight.data_mut() {
                *w = normal.sample(&mut rng);
            }
        }
        Ok(params)
    }

    /// Assemble from explicit layers; every shape must match the architecture.
    pub fn from_layers(arch: Architecture, layers: Vec<Layer>) -> Result<Self> {
        arch.validate()?;
        let shapes = arch.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::ShapeMismatch {
                context: "layer count",
                expected: vec![shapes.len()],
                actual: vec![layers.len()],
            });
        }
        for ((w, b), layer) in shapes.iter().zip(&layers) {
            for (expected, t) in [(w, &layer.weight), (b, &layer.bias)] {
                if t.shape() != expected.as_slice() {
                    return Err(Error::ShapeMismatch {
                        context: "layer parameters",
                        expected: expected.clone(),
                        actual: t.shape().to_vec(),
                    });
                }
            }
        }
        Ok(ModelParams { arch, layers })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.arch.parameter_count()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub(crate) fn check_input(&self, batch: &Tensor) -> Result<usize> {
        let expected = self.arch.input_shape();
        let ok = match &self.arch {
            // trailing axes are flattened for the MLP
            Architecture::Mlp { input_dim, .. } => {
                batch.shape().len() >= 2 && batch.row_len() == *input_dim
            }
            Architecture::DensityConv { .. } => {
                batch.shape().len() == 4 && batch.shape()[1..] == expected[..]
            }
        };
        if !ok {
            let mut full = vec![batch.rows()];
            full.extend(expected);
            return Err(Error::ShapeMismatch {
                context: "model input",
                expected: full,
                actual: batch.shape().to_vec(),
            });
        }
        Ok(batch.rows())
    }

    /// Forward pass: `(batch, num_classes)` logits or `(batch, H, W)` density maps.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(batch)?.0)
    }

    pub(crate) fn forward_cached(&self, batch: &Tensor) -> Result<(Tensor, ForwardCache)> {
        let n = self.check_input(batch)?;
        let (out, cache) = match &self.arch {
            Architecture::Mlp { num_classes, .. } => {
                let acts = mlp::forward(&self.layers, batch.data(), n);
                let logits = acts.last().cloned().unwrap_or_default();
                (Tensor::new(vec![n, *num_classes], logits)?, ForwardCache::Mlp(acts))
            }
            Architecture::DensityConv {
                height,
                width,
                ..
            } => {
                let geom = conv::Geometry {
                    batch: n,
                    height: *height,
                    width: *width,
                };
                let c = conv::forward(&self.layers, batch.data(), geom);
                let out = Tensor::new(vec![n, *height, *width], c.output.clone())?;
                (out, ForwardCache::Conv(c, geom))
            }
        };
        out.ensure_finite("forward pass")?;
        Ok((out, cache))
    }

    /// Gradient of a scalar loss given `d_output`, its derivative w.r.t. the forward output.
    pub(crate) fn backward(
        &self,
        batch: &Tensor,
        cache: &ForwardCache,
        d_output: &[f64],
    ) -> Gradients {
        match cache {
            ForwardCache::Mlp(acts) => Gradients {
                layers: mlp::backward(&self.layers, batch.data(), acts, d_output),
            },
            ForwardCache::Conv(c, geom) => Gradients {
                layers: conv::backward(&self.layers, batch.data(), c, d_output, *geom),
            },
        }
    }
}

pub(crate) enum ForwardCache {
    /// Output of every layer (post-ReLU for hidden layers, raw logits last).
    Mlp(Vec<Vec<f64>>),
    Conv(conv::Activations, conv::Geometry),
}

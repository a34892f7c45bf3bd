use super::Layer;
use crate::tensor::Tensor;

/// Returns the output of every layer. Hidden layers are ReLU'd; the last is linear.
pub(super) fn forward(layers: &[Layer], input: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    for (li, layer) in layers.iter().enumerate() {
        let x = if li == 0 { input } else { &acts[li - 1] };
        let (out_dim, in_dim) = (layer.weight.shape()[0], layer.weight.shape()[1]);
        let w = layer.weight.data();
        let b = layer.bias.data();
        let last = li + 1 == layers.len();
        let mut y = vec![0.0; n * out_dim];
        for s in 0..n {
            let xs = &x[s * in_dim..(s + 1) * in_dim];
            for o in 0..out_dim {
                let wr = &w[o * in_dim..(o + 1) * in_dim];
                let mut acc = b[o];
                for (wi, xi) in wr.iter().zip(xs) {
                    acc += wi * xi;
                }
                y[s * out_dim + o] = if last { acc } else { acc.max(0.0) };
            }
        }
        acts.push(y);
    }
    acts
}

pub(super) fn backward(
    layers: &[Layer],
    input: &[f64],
    acts: &[Vec<f64>],
    d_out: &[f64],
) -> Vec<Layer> {
    let mut grads: Vec<Layer> = layers
        .iter()
        .map(|l| Layer {
            weight: Tensor::zeros(l.weight.shape()),
            bias: Tensor::zeros(l.bias.shape()),
        })
        .collect();
    let mut delta = d_out.to_vec();
    for li in (0..layers.len()).rev() {
        let layer = &layers[li];
        let (out_dim, in_dim) = (layer.weight.shape()[0], layer.weight.shape()[1]);
        let n = delta.len() / out_dim;
        let x = if li == 0 { input } else { &acts[li - 1] };
        let w = layer.weight.data();
        let gl = &mut grads[li];
        {
            let gw = gl.weight.data_mut();
            for s in 0..n {
                let xs = &x[s * in_dim..(s + 1) * in_dim];
                for o in 0..out_dim {
                    let d = delta[s * out_dim + o];
                    if d == 0.0 {
                        continue;
                    }
                    for (g, xi) in gw[o * in_dim..(o + 1) * in_dim].iter_mut().zip(xs) {
                        *g += d * xi;
                    }
                }
            }
        }
        {
            let gb = gl.bias.data_mut();
            for s in 0..n {
                for o in 0..out_dim {
                    gb[o] += delta[s * out_dim + o];
                }
            }
        }
        if li == 0 {
            break;
        }
        // propagate through the weights, then through the previous layer's ReLU
        let mut prev = vec![0.0; n * in_dim];
        for s in 0..n {
            for o in 0..out_dim {
                let d = delta[s * out_dim + o];
                if d == 0.0 {
                    continue;
                }
                for (p, wi) in prev[s * in_dim..(s + 1) * in_dim]
                    .iter_mut()
                    .zip(&w[o * in_dim..(o + 1) * in_dim])
                {
                    *p += d * wi;
                }
            }
        }
        for (p, a) in prev.iter_mut().zip(x) {
            if *a <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
    grads
}

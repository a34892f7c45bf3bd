use super::Layer;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
}

pub(crate) struct Activations {
    /// Post-ReLU output of the first convolution, `(B, C1, H, W)`.
    pub a1: Vec<f64>,
    /// Post-ReLU output of the second convolution, `(B, C2, H, W)`.
    pub a2: Vec<f64>,
    /// Linear `1 x 1` head output, `(B, H, W)`.
    pub output: Vec<f64>,
}

/// Same-padded cross-correlation. `weight` is `(C_out, C_in, k, k)`.
fn conv_same(input: &[f64], c_in: usize, layer: &Layer, g: Geometry, relu: bool) -> Vec<f64> {
    let c_out = layer.weight.shape()[0];
    let k = layer.weight.shape()[2];
    let pad = (k / 2) as isize;
    let (h, w) = (g.height, g.width);
    let hw = h * w;
    let wt = layer.weight.data();
    let bias = layer.bias.data();
    let mut out = vec![0.0; g.batch * c_out * hw];
    for b in 0..g.batch {
        for o in 0..c_out {
            let plane = &mut out[(b * c_out + o) * hw..(b * c_out + o + 1) * hw];
            plane.iter_mut().for_each(|v| *v = bias[o]);
            for c in 0..c_in {
                let src = &input[(b * c_in + c) * hw..(b * c_in + c + 1) * hw];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = wt[((o * c_in + c) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let dy = ky as isize - pad;
                        let dx = kx as isize - pad;
                        for y in 0..h {
                            let sy = y as isize + dy;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let row = &src[sy as usize * w..(sy as usize + 1) * w];
                            let dst = &mut plane[y * w..(y + 1) * w];
                            let x0 = (-dx).max(0) as usize;
                            let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                            for x in x0..x1 {
                                dst[x] += wv * row[(x as isize + dx) as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    if relu {
        out.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    out
}

/// Accumulates weight/bias gradients and returns the input gradient.
fn conv_same_backward(
    input: &[f64],
    c_in: usize,
    layer: &Layer,
    d_out: &[f64],
    g: Geometry,
    grad: &mut Layer,
    need_input_grad: bool,
) -> Vec<f64> {
    let c_out = layer.weight.shape()[0];
    let k = layer.weight.shape()[2];
    let pad = (k / 2) as isize;
    let (h, w) = (g.height, g.width);
    let hw = h * w;
    let wt = layer.weight.data();
    let mut d_in = if need_input_grad {
        vec![0.0; g.batch * c_in * hw]
    } else {
        Vec::new()
    };
    {
        let gb = grad.bias.data_mut();
        for b in 0..g.batch {
            for (o, gbo) in gb.iter_mut().enumerate() {
                *gbo += d_out[(b * c_out + o) * hw..(b * c_out + o + 1) * hw]
                    .iter()
                    .sum::<f64>();
            }
        }
    }
    let gw = grad.weight.data_mut();
    for b in 0..g.batch {
        for o in 0..c_out {
            let dplane = &d_out[(b * c_out + o) * hw..(b * c_out + o + 1) * hw];
            for c in 0..c_in {
                let src_off = (b * c_in + c) * hw;
                for ky in 0..k {
                    for kx in 0..k {
                        let widx = ((o * c_in + c) * k + ky) * k + kx;
                        let dy = ky as isize - pad;
                        let dx = kx as isize - pad;
                        let x0 = (-dx).max(0) as usize;
                        let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                        let mut acc = 0.0;
                        for y in 0..h {
                            let sy = y as isize + dy;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let srow = src_off + sy as usize * w;
                            for x in x0..x1 {
                                let d = dplane[y * w + x];
                                let si = srow + (x as isize + dx) as usize;
                                acc += d * input[si];
                                if need_input_grad {
                                    d_in[si] += d * wt[widx];
                                }
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
    d_in
}

pub(super) fn forward(layers: &[Layer], input: &[f64], g: Geometry) -> Activations {
    let c_in = layers[0].weight.shape()[1];
    let c1 = layers[0].weight.shape()[0];
    let c2 = layers[1].weight.shape()[0];
    let a1 = conv_same(input, c_in, &layers[0], g, true);
    let a2 = conv_same(&a1, c1, &layers[1], g, true);
    let output = conv_same(&a2, c2, &layers[2], g, false);
    Activations { a1, a2, output }
}

pub(super) fn backward(
    layers: &[Layer],
    input: &[f64],
    acts: &Activations,
    d_out: &[f64],
    g: Geometry,
) -> Vec<Layer> {
    let mut grads: Vec<Layer> = layers
        .iter()
        .map(|l| Layer {
            weight: Tensor::zeros(l.weight.shape()),
            bias: Tensor::zeros(l.bias.shape()),
        })
        .collect();
    let c_in = layers[0].weight.shape()[1];
    let c1 = layers[0].weight.shape()[0];
    let c2 = layers[1].weight.shape()[0];

    let mut d_a2 = conv_same_backward(&acts.a2, c2, &layers[2], d_out, g, &mut grads[2], true);
    relu_mask(&mut d_a2, &acts.a2);
    let mut d_a1 = conv_same_backward(&acts.a1, c1, &layers[1], &d_a2, g, &mut grads[1], true);
    relu_mask(&mut d_a1, &acts.a1);
    conv_same_backward(input, c_in, &layers[0], &d_a1, g, &mut grads[0], false);
    grads
}

fn relu_mask(delta: &mut [f64], post: &[f64]) {
    for (d, a) in delta.iter_mut().zip(post) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }
}

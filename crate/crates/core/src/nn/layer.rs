//! Layer kinds: shape arithmetic, parameter layout, forward, and backward.
//!
//! Parameter layout per layer is weights first, then biases (BatchNorm:
//! gammas then betas). Accumulations run in f64; stored activations,
//! parameters, and gradients are f32.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor4;

const BN_EPS: f64 = 1e-5;

/// Channel/height/width shape of one sample.
pub type Shape = (usize, usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize },
    DepthwiseConv2d { channels: usize, kernel: usize, stride: usize, padding: usize },
    PointwiseConv2d { in_ch: usize, out_ch: usize },
    ReLU,
    MaxPool2d { kernel: usize, stride: usize },
    GlobalAvgPool,
    Linear { in_features: usize, out_features: usize },
    BatchNorm2d { channels: usize },
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::DepthwiseConv2d { .. } => "dwconv2d",
            LayerSpec::PointwiseConv2d { .. } => "pwconv2d",
            LayerSpec::ReLU => "relu",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::GlobalAvgPool => "gap",
            LayerSpec::Linear { .. } => "linear",
            LayerSpec::BatchNorm2d { .. } => "batchnorm2d",
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv2d { in_ch, out_ch, kernel, .. } => kernel * kernel * in_ch * out_ch + out_ch,
            LayerSpec::DepthwiseConv2d { channels, kernel, .. } => kernel * kernel * channels + channels,
            LayerSpec::PointwiseConv2d { in_ch, out_ch } => in_ch * out_ch + out_ch,
            LayerSpec::Linear { in_features, out_features } => in_features * out_features + out_features,
            LayerSpec::BatchNorm2d { channels } => 2 * channels,
            LayerSpec::ReLU | LayerSpec::MaxPool2d { .. } | LayerSpec::GlobalAvgPool => 0,
        }
    }

    /// Output shape for a given input shape, validating compatibility.
    pub fn out_shape(&self, input: Shape) -> Result<Shape> {
        let (c, h, w) = input;
        let conv_dim = |n: usize, k: usize, s: usize, p: usize| -> Result<usize> {
            if k == 0 || s == 0 {
                return Err(Error::Parameter("kernel and stride must be at least 1".into()));
            }
            let padded = n + 2 * p;
            if padded < k {
                return Err(Error::Dimension(format!(
                    "window {k} exceeds padded extent {padded}"
                )));
            }
            Ok((padded - k) / s + 1)
        };
        match *self {
            LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
                if c != in_ch {
                    return Err(Error::Dimension(format!("conv expects {in_ch} channels, got {c}")));
                }
                Ok((out_ch, conv_dim(h, kernel, stride, padding)?, conv_dim(w, kernel, stride, padding)?))
            }
            LayerSpec::DepthwiseConv2d { channels, kernel, stride, padding } => {
                if c != channels {
                    return Err(Error::Dimension(format!(
                        "depthwise conv expects {channels} channels, got {c}"
                    )));
                }
                Ok((channels, conv_dim(h, kernel, stride, padding)?, conv_dim(w, kernel, stride, padding)?))
            }
            LayerSpec::PointwiseConv2d { in_ch, out_ch } => {
                if c != in_ch {
                    return Err(Error::Dimension(format!(
                        "pointwise conv expects {in_ch} channels, got {c}"
                    )));
                }
                Ok((out_ch, h, w))
            }
            LayerSpec::ReLU | LayerSpec::BatchNorm2d { .. } => {
                if let LayerSpec::BatchNorm2d { channels } = *self {
                    if c != channels {
                        return Err(Error::Dimension(format!(
                            "batchnorm expects {channels} channels, got {c}"
                        )));
                    }
                }
                Ok((c, h, w))
            }
            LayerSpec::MaxPool2d { kernel, stride } => {
                Ok((c, conv_dim(h, kernel, stride, 0)?, conv_dim(w, kernel, stride, 0)?))
            }
            LayerSpec::GlobalAvgPool => Ok((c, 1, 1)),
            LayerSpec::Linear { in_features, out_features } => {
                if c * h * w != in_features {
                    return Err(Error::Dimension(format!(
                        "linear expects {in_features} inputs, got {c}x{h}x{w}"
                    )));
                }
                Ok((out_features, 1, 1))
            }
        }
    }
}

pub fn forward_layer(spec: &LayerSpec, params: &[f32], input: &Tensor4) -> Result<Tensor4> {
    let (oc, oh, ow) = spec.out_shape((input.channels, input.height, input.width))?;
    let mut out = Tensor4::zeros(input.batch, oc, oh, ow);
    match *spec {
        LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
            let (weights, biases) = params.split_at(kernel * kernel * in_ch * out_ch);
            for b in 0..input.batch {
                for o in 0..out_ch {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = biases[o] as f64;
                            for i in 0..in_ch {
                                for ky in 0..kernel {
                                    let sy = (oy * stride + ky) as isize - padding as isize;
                                    if sy < 0 || sy >= input.height as isize {
                                        continue;
                                    }
                                    for kx in 0..kernel {
                                        let sx = (ox * stride + kx) as isize - padding as isize;
                                        if sx < 0 || sx >= input.width as isize {
                                            continue;
                                        }
                                        let w = weights[((o * in_ch + i) * kernel + ky) * kernel + kx];
                                        acc += w as f64
                                            * input.get(b, i, sy as usize, sx as usize) as f64;
                                    }
                                }
                            }
                            out.set(b, o, oy, ox, acc as f32);
                        }
                    }
                }
            }
        }
        LayerSpec::DepthwiseConv2d { channels, kernel, stride, padding } => {
            let (weights, biases) = params.split_at(kernel * kernel * channels);
            for b in 0..input.batch {
                for c in 0..channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = biases[c] as f64;
                            for ky in 0..kernel {
                                let sy = (oy * stride + ky) as isize - padding as isize;
                                if sy < 0 || sy >= input.height as isize {
                                    continue;
                                }
                                for kx in 0..kernel {
                                    let sx = (ox * stride + kx) as isize - padding as isize;
                                    if sx < 0 || sx >= input.width as isize {
                                        continue;
                                    }
                                    acc += weights[(c * kernel + ky) * kernel + kx] as f64
                                        * input.get(b, c, sy as usize, sx as usize) as f64;
                                }
                            }
                            out.set(b, c, oy, ox, acc as f32);
                        }
                    }
                }
            }
        }
        LayerSpec::PointwiseConv2d { in_ch, out_ch } => {
            let (weights, biases) = params.split_at(in_ch * out_ch);
            let area = input.height * input.width;
            for b in 0..input.batch {
                for o in 0..out_ch {
                    for p in 0..area {
                        let mut acc = biases[o] as f64;
                        for i in 0..in_ch {
                            acc += weights[o * in_ch + i] as f64
                                * input.data[(b * in_ch + i) * area + p] as f64;
                        }
                        out.data[(b * out_ch + o) * area + p] = acc as f32;
                    }
                }
            }
        }
        LayerSpec::ReLU => {
            for (o, &v) in out.data.iter_mut().zip(&input.data) {
                *o = v.max(0.0);
            }
        }
        LayerSpec::MaxPool2d { kernel, stride } => {
            for b in 0..input.batch {
                for c in 0..input.channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut best = f32::NEG_INFINITY;
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    best = best.max(input.get(b, c, oy * stride + ky, ox * stride + kx));
                                }
                            }
                            out.set(b, c, oy, ox, best);
                        }
                    }
                }
            }
        }
        LayerSpec::GlobalAvgPool => {
            let area = input.height * input.width;
            for b in 0..input.batch {
                for c in 0..input.channels {
                    let base = (b * input.channels + c) * area;
                    let sum: f64 = input.data[base..base + area].iter().map(|&v| v as f64).sum();
                    out.set(b, c, 0, 0, (sum / area as f64) as f32);
                }
            }
        }
        LayerSpec::Linear { in_features, out_features } => {
            let (weights, biases) = params.split_at(in_features * out_features);
            for b in 0..input.batch {
                let base = b * in_features;
                for o in 0..out_features {
                    let mut acc = biases[o] as f64;
                    for i in 0..in_features {
                        acc += weights[o * in_features + i] as f64 * input.data[base + i] as f64;
                    }
                    out.set(b, o, 0, 0, acc as f32);
                }
            }
        }
        LayerSpec::BatchNorm2d { channels } => {
            let (gamma, beta) = params.split_at(channels);
            let (mean, var) = batch_stats(input);
            let area = input.height * input.width;
            for b in 0..input.batch {
                for c in 0..channels {
                    let inv = 1.0 / (var[c] + BN_EPS).sqrt();
                    let base = (b * channels + c) * area;
                    for p in 0..area {
                        let xh = (input.data[base + p] as f64 - mean[c]) * inv;
                        out.data[base + p] = (gamma[c] as f64 * xh + beta[c] as f64) as f32;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-channel mean and (biased) variance over batch and spatial dims.
fn batch_stats(input: &Tensor4) -> (Vec<f64>, Vec<f64>) {
    let area = input.height * input.width;
    let n = (input.batch * area) as f64;
    let mut mean = vec![0.0f64; input.channels];
    let mut var = vec![0.0f64; input.channels];
    for b in 0..input.batch {
        for c in 0..input.channels {
            let base = (b * input.channels + c) * area;
            for p in 0..area {
                mean[c] += input.data[base + p] as f64;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    for b in 0..input.batch {
        for c in 0..input.channels {
            let base = (b * input.channels + c) * area;
            for p in 0..area {
                let d = input.data[base + p] as f64 - mean[c];
                var[c] += d * d;
            }
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

/// Backward pass for one layer: writes parameter gradients into
/// `grad_params` (same layout as `params`) and returns the input gradient.
/// `input` must be the activation the forward pass consumed.
pub fn backward_layer(
    spec: &LayerSpec,
    params: &[f32],
    input: &Tensor4,
    grad_out: &Tensor4,
    grad_params: &mut [f32],
) -> Result<Tensor4> {
    let mut grad_in = Tensor4::zeros(input.batch, input.channels, input.height, input.width);
    match *spec {
        LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
            let weights = &params[..kernel * kernel * in_ch * out_ch];
            let mut gw = vec![0.0f64; kernel * kernel * in_ch * out_ch];
            let mut gb = vec![0.0f64; out_ch];
            let mut gi = vec![0.0f64; grad_in.data.len()];
            for b in 0..input.batch {
                for o in 0..out_ch {
                    for oy in 0..grad_out.height {
                        for ox in 0..grad_out.width {
                            let g = grad_out.get(b, o, oy, ox) as f64;
                            if g == 0.0 {
                                continue;
                            }
                            gb[o] += g;
                            for i in 0..in_ch {
                                for ky in 0..kernel {
                                    let sy = (oy * stride + ky) as isize - padding as isize;
                                    if sy < 0 || sy >= input.height as isize {
                                        continue;
                                    }
                                    for kx in 0..kernel {
                                        let sx = (ox * stride + kx) as isize - padding as isize;
                                        if sx < 0 || sx >= input.width as isize {
                                            continue;
                                        }
                                        let wi = ((o * in_ch + i) * kernel + ky) * kernel + kx;
                                        gw[wi] += g * input.get(b, i, sy as usize, sx as usize) as f64;
                                        gi[grad_in.idx(b, i, sy as usize, sx as usize)] +=
                                            g * weights[wi] as f64;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            write_grads(grad_params, &gw, &gb);
            for (dst, &src) in grad_in.data.iter_mut().zip(&gi) {
                *dst = src as f32;
            }
        }
        LayerSpec::DepthwiseConv2d { channels, kernel, stride, padding } => {
            let weights = &params[..kernel * kernel * channels];
            let mut gw = vec![0.0f64; kernel * kernel * channels];
            let mut gb = vec![0.0f64; channels];
            let mut gi = vec![0.0f64; grad_in.data.len()];
            for b in 0..input.batch {
                for c in 0..channels {
                    for oy in 0..grad_out.height {
                        for ox in 0..grad_out.width {
                            let g = grad_out.get(b, c, oy, ox) as f64;
                            if g == 0.0 {
                                continue;
                            }
                            gb[c] += g;
                            for ky in 0..kernel {
                                let sy = (oy * stride + ky) as isize - padding as isize;
                                if sy < 0 || sy >= input.height as isize {
                                    continue;
                                }
                                for kx in 0..kernel {
                                    let sx = (ox * stride + kx) as isize - padding as isize;
                                    if sx < 0 || sx >= input.width as isize {
                                        continue;
                                    }
                                    let wi = (c * kernel + ky) * kernel + kx;
                                    gw[wi] += g * input.get(b, c, sy as usize, sx as usize) as f64;
                                    gi[grad_in.idx(b, c, sy as usize, sx as usize)] +=
                                        g * weights[wi] as f64;
                                }
                            }
                        }
                    }
                }
            }
            write_grads(grad_params, &gw, &gb);
            for (dst, &src) in grad_in.data.iter_mut().zip(&gi) {
                *dst = src as f32;
            }
        }
        LayerSpec::PointwiseConv2d { in_ch, out_ch } => {
            let weights = &params[..in_ch * out_ch];
            let area = input.height * input.width;
            let mut gw = vec![0.0f64; in_ch * out_ch];
            let mut gb = vec![0.0f64; out_ch];
            let mut gi = vec![0.0f64; grad_in.data.len()];
            for b in 0..input.batch {
                for o in 0..out_ch {
                    for p in 0..area {
                        let g = grad_out.data[(b * out_ch + o) * area + p] as f64;
                        if g == 0.0 {
                            continue;
                        }
                        gb[o] += g;
                        for i in 0..in_ch {
                            gw[o * in_ch + i] += g * input.data[(b * in_ch + i) * area + p] as f64;
                            gi[(b * in_ch + i) * area + p] += g * weights[o * in_ch + i] as f64;
                        }
                    }
                }
            }
            write_grads(grad_params, &gw, &gb);
            for (dst, &src) in grad_in.data.iter_mut().zip(&gi) {
                *dst = src as f32;
            }
        }
        LayerSpec::ReLU => {
            for i in 0..input.data.len() {
                grad_in.data[i] = if input.data[i] > 0.0 { grad_out.data[i] } else { 0.0 };
            }
        }
        LayerSpec::MaxPool2d { kernel, stride } => {
            // Gradient routes to the first maximum in scan order.
            for b in 0..input.batch {
                for c in 0..input.channels {
                    for oy in 0..grad_out.height {
                        for ox in 0..grad_out.width {
                            let (mut best, mut by, mut bx) = (f32::NEG_INFINITY, 0, 0);
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    let v = input.get(b, c, oy * stride + ky, ox * stride + kx);
                                    if v > best {
                                        best = v;
                                        by = oy * stride + ky;
                                        bx = ox * stride + kx;
                                    }
                                }
                            }
                            let gi = grad_in.idx(b, c, by, bx);
                            grad_in.data[gi] += grad_out.get(b, c, oy, ox);
                        }
                    }
                }
            }
        }
        LayerSpec::GlobalAvgPool => {
            let area = input.height * input.width;
            let inv = 1.0 / area as f32;
            for b in 0..input.batch {
                for c in 0..input.channels {
                    let g = grad_out.get(b, c, 0, 0) * inv;
                    let base = (b * input.channels + c) * area;
                    for p in 0..area {
                        grad_in.data[base + p] = g;
                    }
                }
            }
        }
        LayerSpec::Linear { in_features, out_features } => {
            let weights = &params[..in_features * out_features];
            let mut gw = vec![0.0f64; in_features * out_features];
            let mut gb = vec![0.0f64; out_features];
            for b in 0..input.batch {
                let base = b * in_features;
                for o in 0..out_features {
                    let g = grad_out.get(b, o, 0, 0) as f64;
                    if g == 0.0 {
                        continue;
                    }
                    gb[o] += g;
                    for i in 0..in_features {
                        gw[o * in_features + i] += g * input.data[base + i] as f64;
                        grad_in.data[base + i] += (g * weights[o * in_features + i] as f64) as f32;
                    }
                }
            }
            write_grads(grad_params, &gw, &gb);
        }
        LayerSpec::BatchNorm2d { channels } => {
            let gamma = &params[..channels];
            let (mean, var) = batch_stats(input);
            let area = input.height * input.width;
            let n = (input.batch * area) as f64;
            for c in 0..channels {
                let inv = 1.0 / (var[c] + BN_EPS).sqrt();
                // Batch-statistics backward needs the means of g and g*xhat.
                let (mut sum_g, mut sum_gx) = (0.0f64, 0.0f64);
                for b in 0..input.batch {
                    let base = (b * channels + c) * area;
                    for p in 0..area {
                        let g = grad_out.data[base + p] as f64;
                        let xh = (input.data[base + p] as f64 - mean[c]) * inv;
                        sum_g += g;
                        sum_gx += g * xh;
                    }
                }
                grad_params[channels + c] = sum_g as f32;
                grad_params[c] = sum_gx as f32;
                let scale = gamma[c] as f64 * inv;
                for b in 0..input.batch {
                    let base = (b * channels + c) * area;
                    for p in 0..area {
                        let g = grad_out.data[base + p] as f64;
                        let xh = (input.data[base + p] as f64 - mean[c]) * inv;
                        grad_in.data[base + p] =
                            (scale * (g - sum_g / n - xh * sum_gx / n)) as f32;
                    }
                }
            }
        }
    }
    Ok(grad_in)
}

fn write_grads(grad_params: &mut [f32], gw: &[f64], gb: &[f64]) {
    for (dst, &src) in grad_params[..gw.len()].iter_mut().zip(gw) {
        *dst = src as f32;
    }
    for (dst, &src) in grad_params[gw.len()..].iter_mut().zip(gb) {
        *dst = src as f32;
    }
}

//! Finite-difference gradient verification.
//!
//! The objective is a fixed random linear functional of the layer output,
//! evaluated by an independent straight-line f64 forward so the central
//! differences are not drowned by single-precision rounding. Every layer
//! here is multilinear or smooth in (params, input), so f64 central
//! differences at eps = 1e-3 are effectively exact away from ReLU/MaxPool
//! kinks; callers must supply inputs with a margin around those.

use crate::error::{Error, Result};
use crate::nn::layer::{backward_layer, LayerSpec, Shape};
use crate::nn::tensor::Tensor4;
use crate::rng::Rng;

const BN_EPS: f64 = 1e-5;

/// Straight-line f64 evaluation of one layer; doubles as a forward oracle.
pub fn reference_forward(
    spec: &LayerSpec,
    params: &[f64],
    input: &[f64],
    shape: Shape,
    batch: usize,
) -> Result<Vec<f64>> {
    let (c, h, w) = shape;
    let (oc, oh, ow) = spec.out_shape(shape)?;
    let mut out = vec![0.0f64; batch * oc * oh * ow];
    let at = |data: &[f64], b: usize, ch: usize, y: usize, x: usize| -> f64 {
        data[((b * c + ch) * h + y) * w + x]
    };
    match *spec {
        LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
            let weights = &params[..kernel * kernel * in_ch * out_ch];
            let biases = &params[kernel * kernel * in_ch * out_ch..];
            for b in 0..batch {
                for o in 0..out_ch {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = biases[o];
                            for i in 0..in_ch {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let sy = (oy * stride + ky) as isize - padding as isize;
                                        let sx = (ox * stride + kx) as isize - padding as isize;
                                        if sy < 0 || sy >= h as isize || sx < 0 || sx >= w as isize {
                                            continue;
                                        }
                                        acc += weights
                                            [((o * in_ch + i) * kernel + ky) * kernel + kx]
                                            * at(input, b, i, sy as usize, sx as usize);
                                    }
                                }
                            }
                            out[((b * oc + o) * oh + oy) * ow + ox] = acc;
                        }
                    }
                }
            }
        }
        LayerSpec::DepthwiseConv2d { channels, kernel, stride, padding } => {
            let weights = &params[..kernel * kernel * channels];
            let biases = &params[kernel * kernel * channels..];
            for b in 0..batch {
                for ch in 0..channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = biases[ch];
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    let sy = (oy * stride + ky) as isize - padding as isize;
                                    let sx = (ox * stride + kx) as isize - padding as isize;
                                    if sy < 0 || sy >= h as isize || sx < 0 || sx >= w as isize {
                                        continue;
                                    }
                                    acc += weights[(ch * kernel + ky) * kernel + kx]
                                        * at(input, b, ch, sy as usize, sx as usize);
                                }
                            }
                            out[((b * oc + ch) * oh + oy) * ow + ox] = acc;
                        }
                    }
                }
            }
        }
        LayerSpec::PointwiseConv2d { in_ch, out_ch } => {
            let weights = &params[..in_ch * out_ch];
            let biases = &params[in_ch * out_ch..];
            for b in 0..batch {
                for o in 0..out_ch {
                    for y in 0..h {
                        for x in 0..w {
                            let mut acc = biases[o];
                            for i in 0..in_ch {
                                acc += weights[o * in_ch + i] * at(input, b, i, y, x);
                            }
                            out[((b * oc + o) * oh + y) * ow + x] = acc;
                        }
                    }
                }
            }
        }
        LayerSpec::ReLU => {
            for (o, &v) in out.iter_mut().zip(input) {
                *o = v.max(0.0);
            }
        }
        LayerSpec::MaxPool2d { kernel, stride } => {
            for b in 0..batch {
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut best = f64::NEG_INFINITY;
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    best = best.max(at(input, b, ch, oy * stride + ky, ox * stride + kx));
                                }
                            }
                            out[((b * oc + ch) * oh + oy) * ow + ox] = best;
                        }
                    }
                }
            }
        }
        LayerSpec::GlobalAvgPool => {
            for b in 0..batch {
                for ch in 0..c {
                    let mut sum = 0.0;
                    for y in 0..h {
                        for x in 0..w {
                            sum += at(input, b, ch, y, x);
                        }
                    }
                    out[b * c + ch] = sum / (h * w) as f64;
                }
            }
        }
        LayerSpec::Linear { in_features, out_features } => {
            let weights = &params[..in_features * out_features];
            let biases = &params[in_features * out_features..];
            for b in 0..batch {
                for o in 0..out_features {
                    let mut acc = biases[o];
                    for i in 0..in_features {
                        acc += weights[o * in_features + i] * input[b * in_features + i];
                    }
                    out[b * out_features + o] = acc;
                }
            }
        }
        LayerSpec::BatchNorm2d { channels } => {
            let gamma = &params[..channels];
            let beta = &params[channels..];
            let n = (batch * h * w) as f64;
            for ch in 0..channels {
                let mut mean = 0.0;
                for b in 0..batch {
                    for y in 0..h {
                        for x in 0..w {
                            mean += at(input, b, ch, y, x);
                        }
                    }
                }
                mean /= n;
                let mut var = 0.0;
                for b in 0..batch {
                    for y in 0..h {
                        for x in 0..w {
                            let d = at(input, b, ch, y, x) - mean;
                            var += d * d;
                        }
                    }
                }
                var /= n;
                let inv = 1.0 / (var + BN_EPS).sqrt();
                for b in 0..batch {
                    for y in 0..h {
                        for x in 0..w {
                            out[((b * c + ch) * h + y) * w + x] =
                                gamma[ch] * (at(input, b, ch, y, x) - mean) * inv + beta[ch];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Seeded random parameters and inputs for a layer check. Inputs are a
/// shuffled arithmetic progression straddling zero with spacing 0.013 and a
/// quarter-step offset, so for even and odd counts alike every value keeps
/// a margin > 2*eps from zero and from every other value (no ReLU or
/// MaxPool tie can flip within the probe).
pub fn random_case(
    spec: &LayerSpec,
    shape: Shape,
    batch: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = Rng::new(seed);
    let n_in = batch * shape.0 * shape.1 * shape.2;
    let mut input: Vec<f64> =
        (0..n_in).map(|i| (i as f64 - n_in as f64 / 2.0 + 0.25) * 0.013).collect();
    rng.shuffle(&mut input);
    let n_params = spec.param_count();
    let mut params: Vec<f64> = (0..n_params).map(|_| rng.uniform_in(-0.8, 0.8)).collect();
    if let LayerSpec::BatchNorm2d { channels } = *spec {
        // Keep gammas away from zero so gradients are visible.
        for g in params[..channels].iter_mut() {
            *g = if *g >= 0.0 { *g + 0.2 } else { *g - 0.2 };
        }
    }
    (params, input)
}

/// Compare `backward_layer` against central finite differences of the f64
/// reference objective over every parameter and every input element.
/// Passes when `|analytic - fd| <= rel_tol * max(|analytic|, |fd|) + abs_tol`
/// with `rel_tol` 1e-3 and `abs_tol` 1e-5.
pub fn check_layer(spec: &LayerSpec, shape: Shape, batch: usize, seed: u64) -> Result<GradCheckReport> {
    const EPS: f64 = 1e-3;
    const REL_TOL: f64 = 1e-3;
    const ABS_TOL: f64 = 1e-5;

    let (params, input) = random_case(spec, shape, batch, seed);
    let mut rng = Rng::new(seed ^ 0x5EED);
    let (oc, oh, ow) = spec.out_shape(shape)?;
    let n_out = batch * oc * oh * ow;
    let probe: Vec<f64> = (0..n_out).map(|_| rng.uniform_in(-1.0, 1.0)).collect();

    let objective = |p: &[f64], x: &[f64]| -> Result<f64> {
        let out = reference_forward(spec, p, x, shape, batch)?;
        Ok(out.iter().zip(&probe).map(|(o, w)| o * w).sum())
    };

    // Analytic gradients from the f32 implementation under test.
    let params_f32: Vec<f32> = params.iter().map(|&p| p as f32).collect();
    let input_t = Tensor4::from_data(
        batch,
        shape.0,
        shape.1,
        shape.2,
        input.iter().map(|&v| v as f32).collect(),
    )?;
    let grad_out = Tensor4::from_data(
        batch,
        oc,
        oh,
        ow,
        probe.iter().map(|&v| v as f32).collect(),
    )?;
    let mut grad_params = vec![0.0f32; params.len()];
    let grad_in = backward_layer(spec, &params_f32, &input_t, &grad_out, &mut grad_params)?;

    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    let mut compare = |analytic: f64, fd: f64, what: &str| -> Result<()> {
        let denom = analytic.abs().max(fd.abs());
        let err = (analytic - fd).abs();
        if err > REL_TOL * denom + ABS_TOL {
            return Err(Error::Numeric(format!(
                "{what}: analytic {analytic} vs finite difference {fd}"
            )));
        }
        if denom > 0.0 {
            max_rel = max_rel.max(err / denom.max(ABS_TOL));
        }
        checked += 1;
        Ok(())
    };

    let mut p = params.clone();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + EPS;
        let plus = objective(&p, &input)?;
        p[i] = orig - EPS;
        let minus = objective(&p, &input)?;
        p[i] = orig;
        compare(grad_params[i] as f64, (plus - minus) / (2.0 * EPS), &format!("param {i}"))?;
    }
    let mut x = input.clone();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + EPS;
        let plus = objective(&params, &x)?;
        x[i] = orig - EPS;
        let minus = objective(&params, &x)?;
        x[i] = orig;
        compare(grad_in.data[i] as f64, (plus - minus) / (2.0 * EPS), &format!("input {i}"))?;
    }
    Ok(GradCheckReport { max_rel_err: max_rel, checked })
}

/// One representative configuration per layer kind at a given seed.
pub fn standard_cases(seed: u64) -> Vec<(LayerSpec, Shape, usize)> {
    let mut rng = Rng::new(seed);
    let c = rng.int_in(1, 3) as usize;
    let oc = rng.int_in(1, 4) as usize;
    let k = *rng.choose(&[1usize, 3]);
    let stride = rng.int_in(1, 2) as usize;
    let h = rng.int_in(5, 8) as usize;
    let w = rng.int_in(5, 8) as usize;
    let batch = rng.int_in(1, 3) as usize;
    vec![
        (
            LayerSpec::Conv2d { in_ch: c, out_ch: oc, kernel: k, stride, padding: k / 2 },
            (c, h, w),
            batch,
        ),
        (
            LayerSpec::DepthwiseConv2d { channels: c, kernel: k, stride, padding: k / 2 },
            (c, h, w),
            batch,
        ),
        (LayerSpec::PointwiseConv2d { in_ch: c, out_ch: oc }, (c, h, w), batch),
        (LayerSpec::ReLU, (c, h, w), batch),
        (LayerSpec::MaxPool2d { kernel: 2, stride }, (c, h, w), batch),
        (LayerSpec::GlobalAvgPool, (c, h, w), batch),
        (LayerSpec::Linear { in_features: c * h * w, out_features: oc }, (c, h, w), batch),
        (LayerSpec::BatchNorm2d { channels: c }, (c, h, w), batch),
    ]
}

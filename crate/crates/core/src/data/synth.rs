//! Procedural two-class image dataset for desk-scale experiments.
//!
//! The "natural" class is low-pass-filtered Gaussian noise, giving the
//! 1/f-like power spectrum of photographic content. The "synthetic" class
//! injects a nearest-neighbor 2x-upsampled half-resolution field on top of
//! the same base, planting the grid harmonics near Nyquist that upsampling
//! generator stacks leave behind. Every image is min-max rendered to the
//! byte range, so the classes are radiometrically indistinguishable and a
//! detector has to learn structure.

use crate::error::{Error, Result};
use crate::fft::{fft2d, ifft2d};
use crate::image::{normalize_range, ImageTensor, RangeTag};
use crate::metrics::Domain;
use crate::rng::Rng;

use super::cache::TensorCache;

/// Strength of the injected artifact relative to the base field amplitude.
const ARTIFACT_GAIN: f64 = 0.55;
/// Amplitude decay exponent range for the base fields. The nearest-neighbor
/// hold filter nulls the spectrum at Nyquist, so the base must decay fast
/// enough that the artifact's residual high band still dominates there.
const ALPHA_RANGE: (f64, f64) = (1.9, 2.3);
/// Softening radius in the radial filter, in frequency-index units.
const FILTER_EPS: f64 = 2.0;

/// Zero-mean random field with an isotropic 1/(eps+r)^alpha amplitude
/// spectrum.
fn low_pass_field(h: usize, w: usize, alpha: f64, rng: &mut Rng) -> Vec<f64> {
    let noise: Vec<f32> = (0..h * w).map(|_| rng.normal() as f32).collect();
    let mut spec = fft2d(h, w, &noise).expect("noise plane matches declared dims");
    for u in 0..h {
        for v in 0..w {
            let du = if u < h.div_ceil(2) { u as f64 } else { u as f64 - h as f64 };
            let dv = if v < w.div_ceil(2) { v as f64 } else { v as f64 - w as f64 };
            let r = du.hypot(dv);
            // Real isotropic filter keeps Hermitian symmetry, so the
            // inverse transform stays real; DC is removed outright.
            let gain = if u == 0 && v == 0 { 0.0 } else { (FILTER_EPS + r).powf(-alpha) };
            let i = u * w + v;
            spec.re[i] *= gain;
            spec.im[i] *= gain;
        }
    }
    ifft2d(&spec).re
}

/// Nearest-neighbor 2x upsample of an (h, w) plane to (2h, 2w).
fn nn_upsample2(h: usize, w: usize, field: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 4 * h * w];
    for y in 0..2 * h {
        for x in 0..2 * w {
            out[y * 2 * w + x] = field[(y / 2) * w + x / 2];
        }
    }
    out
}

fn std_dev(field: &[f64]) -> f64 {
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    (field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Min-max render a scalar field into a 3-channel byte-range tensor. The
/// plane is replicated across channels; class identity lives in structure,
/// not color.
fn render(h: usize, w: usize, field: &[f64]) -> ImageTensor {
    let mut img = ImageTensor::zeros(h, w, 3, RangeTag::Unbounded);
    for y in 0..h {
        for x in 0..w {
            let v = field[y * w + x] as f32;
            for c in 0..3 {
                img.set(y, x, c, v);
            }
        }
    }
    normalize_range(&img, RangeTag::Byte0255).expect("finite field renders to bytes")
}

fn make_image(size: usize, synthetic: bool, rng: &mut Rng) -> ImageTensor {
    let alpha = rng.uniform_in(ALPHA_RANGE.0, ALPHA_RANGE.1);
    let mut field = low_pass_field(size, size, alpha, rng);
    if synthetic {
        // Broadband half-resolution field; nearest-neighbor duplication
        // turns it into the 2x2 block texture of an upsampling generator.
        let half = size / 2;
        let low: Vec<f64> = (0..half * half).map(|_| rng.normal()).collect();
        let art = nn_upsample2(half, half, &low);
        let scale = ARTIFACT_GAIN * std_dev(&field) / std_dev(&art).max(1e-12);
        for (f, a) in field.iter_mut().zip(&art) {
            *f += scale * a;
        }
    }
    render(size, size, &field)
}

/// Generate matched train/validation caches with `n_per_class` training
/// images per class and a quarter of that per class for validation.
/// Both caches are spatial-domain, byte-range, `size` x `size` pixels.
pub fn synth_dataset(
    n_per_class: usize,
    size: usize,
    rng: &mut Rng,
) -> Result<(TensorCache, TensorCache)> {
    if n_per_class < 8 {
        return Err(Error::Parameter(format!(
            "n_per_class {n_per_class} below the minimum of 8"
        )));
    }
    if size < 16 || size % 2 != 0 {
        return Err(Error::Parameter(format!("size {size} must be even and at least 16")));
    }
    let n_val = n_per_class / 4;
    // One child stream per image: insertion order never disturbs the
    // pixels of an already generated image.
    let mut next_stream = 0u64;
    let mut block = |count: usize, synthetic: bool| -> Vec<ImageTensor> {
        (0..count)
            .map(|_| {
                let mut child = rng.child(next_stream);
                next_stream += 1;
                make_image(size, synthetic, &mut child)
            })
            .collect()
    };
    let mut train_images = block(n_per_class, false);
    train_images.extend(block(n_per_class, true));
    let mut train_labels = vec![0u8; n_per_class];
    train_labels.extend(vec![1u8; n_per_class]);

    let mut val_images = block(n_val, false);
    val_images.extend(block(n_val, true));
    let mut val_labels = vec![0u8; n_val];
    val_labels.extend(vec![1u8; n_val]);

    Ok((
        TensorCache::from_images(&train_images, &train_labels, Domain::Spatial)?,
        TensorCache::from_images(&val_images, &val_labels, Domain::Spatial)?,
    ))
}

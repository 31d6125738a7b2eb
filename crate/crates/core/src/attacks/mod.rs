//! Robustness perturbation suite: crop-and-rescale, Gaussian blur, additive
//! Gaussian noise, JPEG quantization round-trip, and a randomized
//! combination of the four.
//!
//! An [`AttackSpec`] fully determines a perturbation: sampled parameters
//! plus the seed for any randomness the application itself needs (crop
//! position, noise draws, combined sub-attacks). Replaying a spec on the
//! same image is bit-exact.

mod jpeg;

pub use jpeg::{jpeg_roundtrip, jpeg_tables, QuantTables};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::{resize_bilinear, ImageTensor};
use crate::rng::Rng;

pub const CROP_FRACTION_RANGE: (f64, f64) = (0.05, 0.20);
pub const BLUR_KERNELS: [usize; 4] = [3, 5, 7, 9];
pub const BLUR_SIGMAS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
pub const NOISE_VARIANCE_RANGE: (f64, f64) = (5.0, 20.0);
pub const JPEG_QUALITY_RANGE: (i64, i64) = (25, 90);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    Crop,
    Blur,
    Noise,
    Jpeg,
    Combined,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] =
        [AttackKind::Crop, AttackKind::Blur, AttackKind::Noise, AttackKind::Jpeg, AttackKind::Combined];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Crop => "crop",
            AttackKind::Blur => "blur",
            AttackKind::Noise => "noise",
            AttackKind::Jpeg => "jpeg",
            AttackKind::Combined => "combined",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crop" => Ok(AttackKind::Crop),
            "blur" => Ok(AttackKind::Blur),
            "noise" => Ok(AttackKind::Noise),
            "jpeg" => Ok(AttackKind::Jpeg),
            "combined" => Ok(AttackKind::Combined),
            other => Err(Error::Parameter(format!("unknown attack kind {other:?}"))),
        }
    }
}

/// One sampled perturbation. `kind` decides which fields are read; all
/// sampled fields lie in their documented ranges regardless.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub crop_fraction: f64,
    pub blur_kernel: usize,
    pub blur_sigma: f64,
    pub noise_variance: f64,
    pub jpeg_quality: i64,
    /// Inclusion flags for the combined attack, order crop, blur, noise, jpeg.
    pub combined_flags: [bool; 4],
    pub seed: u64,
}

/// Draw a fresh spec for `kind`. Every parameter group is sampled in a fixed
/// order so a spec for one kind stays reproducible no matter which kinds are
/// drawn around it.
pub fn sample_attack(kind: AttackKind, rng: &mut Rng) -> AttackSpec {
    let seed = rng.next_u64();
    let crop_fraction = rng.uniform_in(CROP_FRACTION_RANGE.0, CROP_FRACTION_RANGE.1);
    let blur_kernel = *rng.choose(&BLUR_KERNELS);
    let blur_sigma = *rng.choose(&BLUR_SIGMAS);
    let noise_variance = rng.uniform_in(NOISE_VARIANCE_RANGE.0, NOISE_VARIANCE_RANGE.1);
    let jpeg_quality = rng.int_in(JPEG_QUALITY_RANGE.0, JPEG_QUALITY_RANGE.1);
    let combined_flags = if kind == AttackKind::Combined {
        [rng.bernoulli(0.5), rng.bernoulli(0.5), rng.bernoulli(0.5), rng.bernoulli(0.5)]
    } else {
        [false; 4]
    };
    AttackSpec {
        kind,
        crop_fraction,
        blur_kernel,
        blur_sigma,
        noise_variance,
        jpeg_quality,
        combined_flags,
        seed,
    }
}

/// Apply `spec` to `img`. Output dims always equal input dims; samples stay
/// in [0, 255].
pub fn apply_attack(img: &ImageTensor, spec: &AttackSpec) -> Result<ImageTensor> {
    match spec.kind {
        AttackKind::Crop => {
            crop_with(img, spec.crop_fraction, &mut Rng::new(spec.seed).child(0))
        }
        AttackKind::Blur => blur_with(img, spec.blur_kernel, spec.blur_sigma),
        AttackKind::Noise => {
            noise_with(img, spec.noise_variance, &mut Rng::new(spec.seed).child(1))
        }
        AttackKind::Jpeg => jpeg::jpeg_roundtrip(img, spec.jpeg_quality),
        AttackKind::Combined => {
            let base = Rng::new(spec.seed);
            let mut current = img.clone();
            let order =
                [AttackKind::Crop, AttackKind::Blur, AttackKind::Noise, AttackKind::Jpeg];
            for (i, sub_kind) in order.into_iter().enumerate() {
                if spec.combined_flags[i] {
                    let mut sub_rng = base.child(i as u64 + 1);
                    let sub = sample_attack(sub_kind, &mut sub_rng);
                    current = apply_attack(&current, &sub)?;
                }
            }
            Ok(current)
        }
    }
}

/// Remove `fraction` of the area by extracting a uniformly positioned
/// sub-rectangle with the input's aspect ratio (linear scale `sqrt(1-f)`,
/// rounded to the nearest pixel), then rescale back to the input dims.
fn crop_with(img: &ImageTensor, fraction: f64, rng: &mut Rng) -> Result<ImageTensor> {
    if img.height < 8 || img.width < 8 {
        return Err(Error::Dimension(format!(
            "crop needs at least 8x8, got {}x{}",
            img.height, img.width
        )));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Parameter(format!("crop fraction {fraction} outside [0, 1)")));
    }
    let scale = (1.0 - fraction).sqrt();
    let rect_h = ((img.height as f64 * scale).round() as usize).min(img.height);
    let rect_w = ((img.width as f64 * scale).round() as usize).min(img.width);
    if rect_h < 1 || rect_w < 1 {
        return Err(Error::Parameter("crop rectangle collapsed below 1x1".into()));
    }
    let y0 = rng.int_in(0, (img.height - rect_h) as i64) as usize;
    let x0 = rng.int_in(0, (img.width - rect_w) as i64) as usize;
    let mut rect = ImageTensor::zeros(rect_h, rect_w, img.channels, img.range_tag);
    for y in 0..rect_h {
        for x in 0..rect_w {
            for c in 0..img.channels {
                rect.set(y, x, c, img.get(y0 + y, x0 + x, c));
            }
        }
    }
    resize_bilinear(&rect, img.height, img.width)
}

/// Mirror index into `0..n` without repeating the edge sample.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

/// Gaussian blur: k×k kernel sampled at integer offsets, renormalized to sum
/// one, convolved with reflect padding, clamped to [0, 255].
fn blur_with(img: &ImageTensor, kernel: usize, sigma: f64) -> Result<ImageTensor> {
    if kernel % 2 == 0 || kernel == 0 {
        return Err(Error::Parameter(format!("blur kernel {kernel} must be odd")));
    }
    if sigma <= 0.0 {
        return Err(Error::Parameter(format!("blur sigma {sigma} must be positive")));
    }
    let r = (kernel / 2) as isize;
    let mut weights = vec![0.0f64; kernel * kernel];
    let mut total = 0.0f64;
    for dy in -r..=r {
        for dx in -r..=r {
            let w = (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
            weights[((dy + r) * kernel as isize + (dx + r)) as usize] = w;
            total += w;
        }
    }
    weights.iter_mut().for_each(|w| *w /= total);

    let mut out = ImageTensor::zeros(img.height, img.width, img.channels, img.range_tag);
    for y in 0..img.height {
        for x in 0..img.width {
            for c in 0..img.channels {
                let mut acc = 0.0f64;
                for dy in -r..=r {
                    let sy = reflect(y as isize + dy, img.height);
                    for dx in -r..=r {
                        let sx = reflect(x as isize + dx, img.width);
                        acc += weights[((dy + r) * kernel as isize + (dx + r)) as usize]
                            * img.get(sy, sx, c) as f64;
                    }
                }
                out.set(y, x, c, (acc as f32).clamp(0.0, 255.0));
            }
        }
    }
    Ok(out)
}

/// Add i.i.d. zero-mean Gaussian samples with the given variance (pixel
/// units squared in [0, 255] scale), clamped to [0, 255].
fn noise_with(img: &ImageTensor, variance: f64, rng: &mut Rng) -> Result<ImageTensor> {
    if variance < 0.0 {
        return Err(Error::Parameter(format!("noise variance {variance} is negative")));
    }
    let mut out = img.clone();
    for v in &mut out.data {
        *v = (*v + rng.normal_with_variance(variance) as f32).clamp(0.0, 255.0);
    }
    Ok(out)
}

impl AttackSpec {
    /// Tab-separated replay record, one spec per line. Field order: kind,
    /// seed, crop fraction, blur kernel, blur sigma, noise variance, jpeg
    /// quality, combined flags as four 0/1 characters.
    pub fn to_record(&self) -> String {
        let flags: String =
            self.combined_flags.iter().map(|&f| if f { '1' } else { '0' }).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.kind,
            self.seed,
            self.crop_fraction,
            self.blur_kernel,
            self.blur_sigma,
            self.noise_variance,
            self.jpeg_quality,
            flags
        )
    }

    pub fn from_record(line: &str) -> Result<AttackSpec> {
        let fields: Vec<&str> = line.trim_end_matches('\n').split('\t').collect();
        if fields.len() != 8 {
            return Err(Error::Data(format!(
                "attack record has {} fields, expected 8",
                fields.len()
            )));
        }
        let parse_err = |what: &str| Error::Data(format!("bad {what} in attack record"));
        let kind = fields[0].parse::<AttackKind>()?;
        let seed = fields[1].parse::<u64>().map_err(|_| parse_err("seed"))?;
        let crop_fraction = fields[2].parse::<f64>().map_err(|_| parse_err("crop fraction"))?;
        let blur_kernel = fields[3].parse::<usize>().map_err(|_| parse_err("blur kernel"))?;
        let blur_sigma = fields[4].parse::<f64>().map_err(|_| parse_err("blur sigma"))?;
        let noise_variance =
            fields[5].parse::<f64>().map_err(|_| parse_err("noise variance"))?;
        let jpeg_quality = fields[6].parse::<i64>().map_err(|_| parse_err("jpeg quality"))?;
        let flag_str = fields[7];
        if flag_str.len() != 4 || !flag_str.chars().all(|c| c == '0' || c == '1') {
            return Err(parse_err("combined flags"));
        }
        let mut combined_flags = [false; 4];
        for (i, ch) in flag_str.chars().enumerate() {
            combined_flags[i] = ch == '1';
        }
        Ok(AttackSpec {
            kind,
            crop_fraction,
            blur_kernel,
            blur_sigma,
            noise_variance,
            jpeg_quality,
            combined_flags,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::RangeTag;

    fn ramp256() -> ImageTensor {
        let data: Vec<f32> =
            (0..256 * 256).map(|i| (i % 256) as f32).collect();
        ImageTensor::from_data(256, 256, 1, data, RangeTag::Byte0255).unwrap()
    }

    fn random_img(h: usize, w: usize, c: usize, rng: &mut Rng) -> ImageTensor {
        let data: Vec<f32> = (0..h * w * c).map(|_| rng.uniform_in(0.0, 255.0) as f32).collect();
        ImageTensor::from_data(h, w, c, data, RangeTag::Byte0255).unwrap()
    }

    #[test]
    fn sampled_parameters_stay_in_range() {
        let mut rng = Rng::new(1);
        for _ in 0..2000 {
            let spec = sample_attack(AttackKind::Combined, &mut rng);
            assert!((0.05..=0.20).contains(&spec.crop_fraction));
            assert!(BLUR_KERNELS.contains(&spec.blur_kernel));
            assert!(BLUR_SIGMAS.contains(&spec.blur_sigma));
            assert!((5.0..=20.0).contains(&spec.noise_variance));
            assert!((25..=90).contains(&spec.jpeg_quality));
        }
    }

    #[test]
    fn crop_fraction_mean_is_uniform() {
        let mut rng = Rng::new(2);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_attack(AttackKind::Crop, &mut rng).crop_fraction)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.125).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn jpeg_quality_covers_support() {
        let mut rng = Rng::new(3);
        let mut seen = [false; 66];
        for _ in 0..100_000 {
            let q = sample_attack(AttackKind::Jpeg, &mut rng).jpeg_quality;
            assert!((25..=90).contains(&q));
            seen[(q - 25) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn blur_sampling_reproducible() {
        let spec_a = sample_attack(AttackKind::Blur, &mut Rng::new(17));
        let spec_b = sample_attack(AttackKind::Blur, &mut Rng::new(17));
        assert_eq!(spec_a, spec_b);
    }

    #[test]
    fn combined_flags_are_fair_coins() {
        let mut rng = Rng::new(4);
        let mut counts = [0usize; 4];
        let n = 10_000;
        for _ in 0..n {
            let spec = sample_attack(AttackKind::Combined, &mut rng);
            for (i, &f) in spec.combined_flags.iter().enumerate() {
                counts[i] += f as usize;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.5).abs() < 0.02, "flag {i}: {freq}");
        }
    }

    #[test]
    fn crop_area_within_one_percent() {
        let mut spec = sample_attack(AttackKind::Crop, &mut Rng::new(5));
        spec.crop_fraction = 0.05;
        let scale = (1.0f64 - 0.05).sqrt();
        let rect = (256.0 * scale).round() as f64;
        let area_ratio = rect * rect / (0.95 * 256.0 * 256.0);
        assert!((area_ratio - 1.0).abs() < 0.01, "{area_ratio}");
        // And the attack itself preserves the output dims.
        let out = apply_attack(&ramp256(), &spec).unwrap();
        assert_eq!((out.height, out.width), (256, 256));
    }

    #[test]
    fn crop_of_constant_is_constant() {
        let img =
            ImageTensor::from_data(64, 64, 3, vec![42.0; 64 * 64 * 3], RangeTag::Byte0255)
                .unwrap();
        let mut spec = sample_attack(AttackKind::Crop, &mut Rng::new(6));
        spec.crop_fraction = 0.17;
        let out = apply_attack(&img, &spec).unwrap();
        assert!(out.data.iter().all(|&v| (v - 42.0).abs() < 1e-4));
    }

    #[test]
    fn crop_matches_rect_plus_resize_oracle() {
        let img = ramp256();
        let spec = sample_attack(AttackKind::Crop, &mut Rng::new(7));
        let got = apply_attack(&img, &spec).unwrap();

        // Re-derive the rectangle exactly as documented, slice by hand, then
        // lean on the separately verified resizer.
        let scale = (1.0 - spec.crop_fraction).sqrt();
        let rect_h = (256.0 * scale).round() as usize;
        let rect_w = (256.0 * scale).round() as usize;
        let mut pos_rng = Rng::new(spec.seed).child(0);
        let y0 = pos_rng.int_in(0, (256 - rect_h) as i64) as usize;
        let x0 = pos_rng.int_in(0, (256 - rect_w) as i64) as usize;
        let mut rect = ImageTensor::zeros(rect_h, rect_w, 1, RangeTag::Byte0255);
        for y in 0..rect_h {
            for x in 0..rect_w {
                rect.set(y, x, 0, img.get(y0 + y, x0 + x, 0));
            }
        }
        let want = resize_bilinear(&rect, 256, 256).unwrap();
        assert_eq!(got.data, want.data);
    }

    #[test]
    fn blur_constant_is_identity() {
        let img =
            ImageTensor::from_data(32, 32, 1, vec![100.0; 32 * 32], RangeTag::Byte0255).unwrap();
        let mut spec = sample_attack(AttackKind::Blur, &mut Rng::new(8));
        spec.blur_kernel = 7;
        spec.blur_sigma = 2.0;
        let out = apply_attack(&img, &spec).unwrap();
        assert!(out.data.iter().all(|&v| (v - 100.0).abs() < 1e-4));
    }

    #[test]
    fn blur_impulse_prints_normalized_kernel() {
        let mut img = ImageTensor::zeros(9, 9, 1, RangeTag::Byte0255);
        img.set(4, 4, 0, 1.0);
        let mut spec = sample_attack(AttackKind::Blur, &mut Rng::new(9));
        spec.blur_kernel = 3;
        spec.blur_sigma = 1.0;
        let out = apply_attack(&img, &spec).unwrap();

        // Direct kernel formula evaluated on the 3x3 grid.
        let mut w = [[0.0f64; 3]; 3];
        let mut total = 0.0;
        for (dy, row) in w.iter_mut().enumerate() {
            for (dx, cell) in row.iter_mut().enumerate() {
                let (fy, fx) = (dy as f64 - 1.0, dx as f64 - 1.0);
                *cell = (-(fy * fy + fx * fx) / 2.0).exp();
                total += *cell;
            }
        }
        for dy in 0..3 {
            for dx in 0..3 {
                let want = w[dy][dx] / total;
                let got = out.get(3 + dy, 3 + dx, 0) as f64;
                assert!((got - want).abs() < 1e-6, "({dy},{dx}): {got} vs {want}");
            }
        }
        assert!((out.get(0, 0, 0)).abs() < 1e-9);
    }

    #[test]
    fn blur_never_raises_energy_on_random_images() {
        let mut rng = Rng::new(10);
        for trial in 0..100 {
            let img = random_img(16, 16, 1, &mut rng);
            let mut spec = sample_attack(AttackKind::Blur, &mut rng);
            spec.blur_kernel = *rng.choose(&BLUR_KERNELS);
            spec.blur_sigma = *rng.choose(&BLUR_SIGMAS);
            let out = apply_attack(&img, &spec).unwrap();
            let energy = |t: &ImageTensor| -> f64 {
                t.data.iter().map(|&v| v as f64 * v as f64).sum()
            };
            assert!(
                energy(&out) <= energy(&img) * (1.0 + 1e-9),
                "trial {trial}: blur increased energy"
            );
        }
    }

    #[test]
    fn noise_matches_requested_variance() {
        let img = ImageTensor::from_data(
            512,
            512,
            1,
            vec![128.0; 512 * 512],
            RangeTag::Byte0255,
        )
        .unwrap();
        let mut spec = sample_attack(AttackKind::Noise, &mut Rng::new(11));
        spec.noise_variance = 20.0;
        let out = apply_attack(&img, &spec).unwrap();
        let n = out.data.len() as f64;
        let mean = out.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = out.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!((var - 20.0).abs() < 1.0, "var {var}");
    }

    #[test]
    fn noise_deterministic_and_clamped() {
        let mut rng = Rng::new(12);
        let img = random_img(16, 16, 3, &mut rng);
        let spec = sample_attack(AttackKind::Noise, &mut rng);
        let a = apply_attack(&img, &spec).unwrap();
        let b = apply_attack(&img, &spec).unwrap();
        assert_eq!(a.data, b.data);

        let zeros = ImageTensor::zeros(32, 32, 1, RangeTag::Byte0255);
        let mut spec = sample_attack(AttackKind::Noise, &mut Rng::new(13));
        spec.noise_variance = 5.0;
        let out = apply_attack(&zeros, &spec).unwrap();
        assert!(out.data.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn combined_no_flags_is_identity() {
        let mut rng = Rng::new(14);
        let img = random_img(16, 16, 3, &mut rng);
        let mut spec = sample_attack(AttackKind::Combined, &mut rng);
        spec.combined_flags = [false; 4];
        let out = apply_attack(&img, &spec).unwrap();
        assert_eq!(out.data, img.data);
    }

    #[test]
    fn combined_reproducible() {
        let mut rng = Rng::new(15);
        let img = random_img(24, 24, 3, &mut rng);
        let spec = sample_attack(AttackKind::Combined, &mut Rng::new(16));
        let a = apply_attack(&img, &spec).unwrap();
        let b = apply_attack(&img, &spec).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!((a.height, a.width, a.channels), (24, 24, 3));
        assert!(a.data.iter().all(|&v| (0.0..=255.0).contains(&v)));
    }

    #[test]
    fn record_round_trips() {
        let mut rng = Rng::new(17);
        for kind in AttackKind::ALL {
            let spec = sample_attack(kind, &mut rng);
            let back = AttackSpec::from_record(&spec.to_record()).unwrap();
            assert_eq!(spec, back);
        }
        assert!(AttackSpec::from_record("crop\tnot-a-number").is_err());
    }

    #[test]
    fn attack_outputs_preserve_dims_and_range() {
        let mut rng = Rng::new(18);
        let img = random_img(32, 32, 3, &mut rng);
        for kind in AttackKind::ALL {
            let spec = sample_attack(kind, &mut rng);
            let out = apply_attack(&img, &spec).unwrap();
            assert_eq!((out.height, out.width, out.channels), (32, 32, 3), "{kind}");
            assert!(out.data.iter().all(|&v| (0.0..=255.0).contains(&v)), "{kind}");
        }
    }
}

//! 2D DFT, zero-centering shift, and the log-magnitude spectral transform.
//!
//! The forward transform is the unnormalized DFT
//! `F[u,v] = sum x[m,n] * exp(-2*pi*i*(u*m/H + v*n/W))`; the inverse carries
//! the `1/(H*W)` factor. Sizes are unrestricted (mixed radix).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::{normalize_range, ImageTensor, RangeTag};

/// Complex H×W frequency plane, row-major.
#[derive(Debug, Clone)]
pub struct ComplexPlane {
    pub height: usize,
    pub width: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexPlane {
    pub fn zeros(height: usize, width: usize) -> Self {
        ComplexPlane { height, width, re: vec![0.0; height * width], im: vec![0.0; height * width] }
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> (f64, f64) {
        let i = u * self.width + v;
        (self.re[i], self.im[i])
    }

    pub fn magnitude(&self, u: usize, v: usize) -> f64 {
        let (re, im) = self.at(u, v);
        re.hypot(im)
    }
}

fn fft2d_complex(h: usize, w: usize, mut buf: Vec<Complex<f64>>, inverse: bool) -> ComplexPlane {
    let mut planner = FftPlanner::new();
    let row_fft =
        if inverse { planner.plan_fft_inverse(w) } else { planner.plan_fft_forward(w) };
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    // Transpose, transform the former columns as rows, transpose back.
    let mut t = vec![Complex::new(0.0, 0.0); h * w];
    for y in 0..h {
        for x in 0..w {
            t[x * h + y] = buf[y * w + x];
        }
    }
    let col_fft =
        if inverse { planner.plan_fft_inverse(h) } else { planner.plan_fft_forward(h) };
    for col in t.chunks_exact_mut(h) {
        col_fft.process(col);
    }
    let mut out = ComplexPlane::zeros(h, w);
    let norm = if inverse { 1.0 / (h * w) as f64 } else { 1.0 };
    for y in 0..h {
        for x in 0..w {
            let z = t[x * h + y];
            out.re[y * w + x] = z.re * norm;
            out.im[y * w + x] = z.im * norm;
        }
    }
    out
}

/// Forward 2D DFT of a real plane (row-major, length `h*w`).
pub fn fft2d(h: usize, w: usize, samples: &[f32]) -> Result<ComplexPlane> {
    if h == 0 || w == 0 || samples.len() != h * w {
        return Err(Error::Dimension(format!(
            "fft2d: plane {}x{} with {} samples",
            h,
            w,
            samples.len()
        )));
    }
    let buf: Vec<Complex<f64>> =
        samples.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    Ok(fft2d_complex(h, w, buf, false))
}

/// Inverse 2D DFT, normalized so that `ifft2d(fft2d(x)) == x`.
pub fn ifft2d(spec: &ComplexPlane) -> ComplexPlane {
    let buf: Vec<Complex<f64>> =
        spec.re.iter().zip(&spec.im).map(|(&re, &im)| Complex::new(re, im)).collect();
    fft2d_complex(spec.height, spec.width, buf, true)
}

/// Quadrant swap moving bin (0,0) to (⌊H/2⌋, ⌊W/2⌋). Involutive for even
/// dimensions; for odd dimensions applying the inverse offset undoes it.
pub fn zero_center_shift(spec: &ComplexPlane) -> ComplexPlane {
    let (h, w) = (spec.height, spec.width);
    let mut out = ComplexPlane::zeros(h, w);
    for u in 0..h {
        let su = (u + h / 2) % h;
        for v in 0..w {
            let sv = (v + w / 2) % w;
            out.re[su * w + sv] = spec.re[u * w + v];
            out.im[su * w + sv] = spec.im[u * w + v];
        }
    }
    out
}

/// Zero-centered log-magnitude spectrum of an image, per channel, min-max
/// normalized to [0, 255] over the whole tensor. Output dims equal input
/// dims.
pub fn spectral_image(img: &ImageTensor) -> Result<ImageTensor> {
    if img.is_empty() {
        return Err(Error::Dimension("spectral transform of empty image".into()));
    }
    let mut out = ImageTensor::zeros(img.height, img.width, img.channels, RangeTag::Unbounded);
    for c in 0..img.channels {
        let plane = img.channel_plane(c);
        let spec = zero_center_shift(&fft2d(img.height, img.width, &plane)?);
        for u in 0..img.height {
            for v in 0..img.width {
                out.set(u, v, c, spec.magnitude(u, v).ln_1p() as f32);
            }
        }
    }
    normalize_range(&out, RangeTag::Byte0255)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Brute-force O(N^4) DFT used as the independent oracle.
    fn naive_dft(h: usize, w: usize, x: &[f32]) -> ComplexPlane {
        let mut out = ComplexPlane::zeros(h, w);
        for u in 0..h {
            for v in 0..w {
                let (mut re, mut im) = (0.0f64, 0.0f64);
                for m in 0..h {
                    for n in 0..w {
                        let ang = -std::f64::consts::TAU
                            * (u as f64 * m as f64 / h as f64 + v as f64 * n as f64 / w as f64);
                        let s = x[m * w + n] as f64;
                        re += s * ang.cos();
                        im += s * ang.sin();
                    }
                }
                out.re[u * w + v] = re;
                out.im[u * w + v] = im;
            }
        }
        out
    }

    #[test]
    fn constant_plane_concentrates_at_dc() {
        let c = 3.5f32;
        let n = 16;
        let spec = fft2d(n, n, &vec![c; n * n]).unwrap();
        let dc = c as f64 * (n * n) as f64;
        assert!((spec.at(0, 0).0 - dc).abs() < 1e-6 * dc);
        assert!(spec.at(0, 0).1.abs() < 1e-6 * dc);
        for u in 0..n {
            for v in 0..n {
                if (u, v) != (0, 0) {
                    assert!(spec.magnitude(u, v) < 1e-6 * dc);
                }
            }
        }
    }

    #[test]
    fn impulse_has_flat_magnitude() {
        let mut x = vec![0.0f32; 7 * 5];
        x[0] = 1.0;
        let spec = fft2d(7, 5, &x).unwrap();
        for u in 0..7 {
            for v in 0..5 {
                assert!((spec.magnitude(u, v) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matches_naive_dft_on_random_planes() {
        let mut rng = Rng::new(2024);
        // Includes odd and mixed-radix sizes on purpose.
        for &(h, w) in &[(8, 8), (9, 7), (12, 5), (1, 13)] {
            let x: Vec<f32> = (0..h * w).map(|_| rng.uniform_in(-1.0, 1.0) as f32).collect();
            let fast = fft2d(h, w, &x).unwrap();
            let slow = naive_dft(h, w, &x);
            for i in 0..h * w {
                assert!((fast.re[i] - slow.re[i]).abs() < 1e-6, "re mismatch at {i} ({h}x{w})");
                assert!((fast.im[i] - slow.im[i]).abs() < 1e-6, "im mismatch at {i} ({h}x{w})");
            }
        }
    }

    #[test]
    fn inverse_reconstructs_and_parseval_holds() {
        let mut rng = Rng::new(5);
        let (h, w) = (10, 6);
        let x: Vec<f32> = (0..h * w).map(|_| rng.uniform_in(-2.0, 2.0) as f32).collect();
        let spec = fft2d(h, w, &x).unwrap();
        let back = ifft2d(&spec);
        let scale: f64 = x.iter().map(|&v| (v as f64).abs()).fold(0.0, f64::max);
        for i in 0..h * w {
            assert!((back.re[i] - x[i] as f64).abs() < 1e-5 * scale.max(1.0));
            assert!(back.im[i].abs() < 1e-5 * scale.max(1.0));
        }
        let space_energy: f64 = x.iter().map(|&v| (v as f64) * (v as f64)).sum();
        let freq_energy: f64 = (0..h * w)
            .map(|i| spec.re[i] * spec.re[i] + spec.im[i] * spec.im[i])
            .sum::<f64>()
            / (h * w) as f64;
        assert!((space_energy - freq_energy).abs() < 1e-8 * space_energy.max(1.0));
    }

    #[test]
    fn shift_moves_dc_to_center_and_preserves_values() {
        let mut spec = ComplexPlane::zeros(3, 3);
        spec.re[0] = 9.0; // marker at (0,0)
        let shifted = zero_center_shift(&spec);
        assert_eq!(shifted.at(1, 1).0, 9.0);
        assert_eq!(shifted.at(0, 0).0, 0.0);

        let mut rng = Rng::new(8);
        let x: Vec<f32> = (0..6 * 4).map(|_| rng.uniform_in(-1.0, 1.0) as f32).collect();
        let spec = fft2d(6, 4, &x).unwrap();
        let twice = zero_center_shift(&zero_center_shift(&spec));
        assert_eq!(spec.re, twice.re);
        assert_eq!(spec.im, twice.im);

        // Multiset of complex values is preserved by the shift.
        let once = zero_center_shift(&spec);
        let mut a: Vec<(u64, u64)> =
            spec.re.iter().zip(&spec.im).map(|(r, i)| (r.to_bits(), i.to_bits())).collect();
        let mut b: Vec<(u64, u64)> =
            once.re.iter().zip(&once.im).map(|(r, i)| (r.to_bits(), i.to_bits())).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn spectral_image_of_constant_peaks_at_center() {
        let img = crate::image::ImageTensor::from_data(
            8,
            8,
            3,
            vec![40.0; 8 * 8 * 3],
            RangeTag::Byte0255,
        )
        .unwrap();
        let spec = spectral_image(&img).unwrap();
        for c in 0..3 {
            assert_eq!(spec.get(4, 4, c), 255.0);
            for y in 0..8 {
                for x in 0..8 {
                    if (y, x) != (4, 4) {
                        assert_eq!(spec.get(y, x, c), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn spectral_image_matches_composed_oracle() {
        let data: Vec<f32> = (0..64).map(|i| i as f32 * 4.0).collect();
        let img =
            crate::image::ImageTensor::from_data(8, 8, 1, data.clone(), RangeTag::Byte0255)
                .unwrap();
        let got = spectral_image(&img).unwrap();

        // Oracle: naive DFT -> shift by index arithmetic -> log1p -> min-max.
        let slow = naive_dft(8, 8, &data);
        let mut logmag = vec![0.0f64; 64];
        for u in 0..8 {
            for v in 0..8 {
                let (re, im) = slow.at(u, v);
                logmag[((u + 4) % 8) * 8 + (v + 4) % 8] = re.hypot(im).ln_1p();
            }
        }
        let lo = logmag.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = logmag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..64 {
            let want = (logmag[i] - lo) / (hi - lo) * 255.0;
            let have = got.data[i] as f64;
            assert!((have - want).abs() < 1e-3, "bin {i}: {have} vs {want}");
        }
    }

    #[test]
    fn spectral_image_contract_range_and_dims() {
        let mut rng = Rng::new(314);
        let data: Vec<f32> = (0..10 * 14 * 3).map(|_| rng.uniform_in(0.0, 255.0) as f32).collect();
        let img = crate::image::ImageTensor::from_data(10, 14, 3, data, RangeTag::Byte0255).unwrap();
        let spec = spectral_image(&img).unwrap();
        assert_eq!((spec.height, spec.width, spec.channels), (10, 14, 3));
        assert!(spec.data.iter().all(|&v| (0.0..=255.0).contains(&v)));
        // Determinism: same input twice, bit-identical output.
        let again = spectral_image(&img).unwrap();
        assert_eq!(spec.data, again.data);
    }
}

//! JPEG quantization round-trip: color transform, 8×8 DCT, quantize,
//! dequantize, inverse. Entropy coding is omitted because it is lossless
//! and therefore pixel-irrelevant.

use crate::error::{Error, Result};
use crate::image::{ImageTensor, RangeTag};

/// Baseline luminance quantization table, row-major zig-zag-free order.
const BASE_LUMA: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Baseline chrominance quantization table.
const BASE_CHROMA: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, //
    18, 21, 26, 66, 99, 99, 99, 99, //
    24, 26, 56, 99, 99, 99, 99, 99, //
    47, 66, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// Quality-scaled 8×8 quantization tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantTables {
    pub luma: [u16; 64],
    pub chroma: [u16; 64],
    pub quality: i64,
}

/// Scale the base tables for a quality factor in [1, 100]:
/// `s = 5000/q` below 50, `200 - 2q` otherwise; each entry becomes
/// `clamp(floor((entry*s + 50) / 100), 1, 255)`.
pub fn jpeg_tables(quality: i64) -> Result<QuantTables> {
    if !(1..=100).contains(&quality) {
        return Err(Error::Parameter(format!("jpeg quality {quality} outside [1, 100]")));
    }
    let s = if quality < 50 { 5000 / quality } else { 200 - 2 * quality };
    let scale_one = |entry: u16| -> u16 {
        (((entry as i64 * s + 50) / 100).clamp(1, 255)) as u16
    };
    let mut luma = [0u16; 64];
    let mut chroma = [0u16; 64];
    for i in 0..64 {
        luma[i] = scale_one(BASE_LUMA[i]);
        chroma[i] = scale_one(BASE_CHROMA[i]);
    }
    Ok(QuantTables { luma, chroma, quality })
}

/// Orthonormal 8×8 DCT-II basis matrix: `M[u][x] = 0.5 * a(u) *
/// cos((2x+1) u pi / 16)` with `a(0) = 1/sqrt(2)`.
fn dct_matrix() -> [[f64; 8]; 8] {
    let mut m = [[0.0f64; 8]; 8];
    for (u, row) in m.iter_mut().enumerate() {
        let a = if u == 0 { 1.0 / 2.0f64.sqrt() } else { 1.0 };
        for (x, cell) in row.iter_mut().enumerate() {
            *cell = 0.5
                * a
                * ((2.0 * x as f64 + 1.0) * u as f64 * std::f64::consts::PI / 16.0).cos();
        }
    }
    m
}

/// `out = M * block * M^T` (forward) or `M^T * block * M` (inverse).
fn transform_block(block: &[f64; 64], m: &[[f64; 8]; 8], forward: bool) -> [f64; 64] {
    let mut tmp = [0.0f64; 64];
    for i in 0..8 {
        for j in 0..8 {
            let mut acc = 0.0;
            for k in 0..8 {
                let w = if forward { m[i][k] } else { m[k][i] };
                acc += w * block[k * 8 + j];
            }
            tmp[i * 8 + j] = acc;
        }
    }
    let mut out = [0.0f64; 64];
    for i in 0..8 {
        for j in 0..8 {
            let mut acc = 0.0;
            for k in 0..8 {
                let w = if forward { m[j][k] } else { m[k][j] };
                acc += tmp[i * 8 + k] * w;
            }
            out[i * 8 + j] = acc;
        }
    }
    out
}

/// Quantize one plane in place: per 8×8 block, level shift, DCT, round each
/// coefficient to a multiple of its table entry, inverse DCT, unshift.
/// `plane` dims must already be multiples of 8.
fn quantize_plane(plane: &mut [f64], h: usize, w: usize, table: &[u16; 64], m: &[[f64; 8]; 8]) {
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            let mut block = [0.0f64; 64];
            for y in 0..8 {
                for x in 0..8 {
                    block[y * 8 + x] = plane[(by + y) * w + bx + x] - 128.0;
                }
            }
            let mut coeffs = transform_block(&block, m, true);
            for (c, &q) in coeffs.iter_mut().zip(table.iter()) {
                let q = q as f64;
                // round() ties away from zero, matching quantizer convention
                *c = (*c / q).round() * q;
            }
            let back = transform_block(&coeffs, m, false);
            for y in 0..8 {
                for x in 0..8 {
                    plane[(by + y) * w + bx + x] = back[y * 8 + x] + 128.0;
                }
            }
        }
    }
}

/// Full-range BT.601 RGB -> YCbCr.
fn rgb_to_ycbcr(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    (y, cb, cr)
}

fn ycbcr_to_rgb(y: f64, cb: f64, cr: f64) -> (f64, f64, f64) {
    let r = y + 1.402 * (cr - 128.0);
    let g = y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0);
    let b = y + 1.772 * (cb - 128.0);
    (r, g, b)
}

/// Lossy JPEG simulation on an RGB Byte0255 image: color transform, 4:4:4
/// (no chroma subsampling), quality-scaled quantization of every 8×8 block,
/// inverse, clamp. Non-multiple-of-8 dims are edge-replicated to the next
/// block boundary and cropped back afterwards.
pub fn jpeg_roundtrip(img: &ImageTensor, quality: i64) -> Result<ImageTensor> {
    if img.channels != 3 {
        return Err(Error::Dimension(format!(
            "jpeg round-trip needs 3 channels, got {}",
            img.channels
        )));
    }
    if img.range_tag != RangeTag::Byte0255 {
        return Err(Error::Parameter("jpeg round-trip expects Byte0255 samples".into()));
    }
    if img.is_empty() {
        return Err(Error::Dimension("jpeg round-trip of empty image".into()));
    }
    let tables = jpeg_tables(quality)?;
    let pad_h = img.height.div_ceil(8) * 8;
    let pad_w = img.width.div_ceil(8) * 8;

    let mut planes = [
        vec![0.0f64; pad_h * pad_w],
        vec![0.0f64; pad_h * pad_w],
        vec![0.0f64; pad_h * pad_w],
    ];
    for y in 0..pad_h {
        let sy = y.min(img.height - 1);
        for x in 0..pad_w {
            let sx = x.min(img.width - 1);
            let (r, g, b) =
                (img.get(sy, sx, 0) as f64, img.get(sy, sx, 1) as f64, img.get(sy, sx, 2) as f64);
            let (yy, cb, cr) = rgb_to_ycbcr(r, g, b);
            planes[0][y * pad_w + x] = yy;
            planes[1][y * pad_w + x] = cb;
            planes[2][y * pad_w + x] = cr;
        }
    }

    let m = dct_matrix();
    quantize_plane(&mut planes[0], pad_h, pad_w, &tables.luma, &m);
    quantize_plane(&mut planes[1], pad_h, pad_w, &tables.chroma, &m);
    quantize_plane(&mut planes[2], pad_h, pad_w, &tables.chroma, &m);

    let mut out = ImageTensor::zeros(img.height, img.width, 3, RangeTag::Byte0255);
    for y in 0..img.height {
        for x in 0..img.width {
            let i = y * pad_w + x;
            let (r, g, b) = ycbcr_to_rgb(planes[0][i], planes[1][i], planes[2][i]);
            out.set(y, x, 0, (r as f32).clamp(0.0, 255.0));
            out.set(y, x, 1, (g as f32).clamp(0.0, 255.0));
            out.set(y, x, 2, (b as f32).clamp(0.0, 255.0));
        }
    }
    Ok(out)
}

//! Image tensors, bilinear resizing, and range normalization.

use crate::error::{Error, Result};

/// Declared sample range of an [`ImageTensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeTag {
    Unit01,
    Byte0255,
    Unbounded,
}

impl RangeTag {
    /// Closed target interval, if the tag has one.
    pub fn bounds(self) -> Option<(f32, f32)> {
        match self {
            RangeTag::Unit01 => Some((0.0, 1.0)),
            RangeTag::Byte0255 => Some((0.0, 255.0)),
            RangeTag::Unbounded => None,
        }
    }
}

/// Dense H×W×C image, row-major with channel varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
    pub range_tag: RangeTag,
}

impl ImageTensor {
    pub fn zeros(height: usize, width: usize, channels: usize, range_tag: RangeTag) -> Self {
        ImageTensor { height, width, channels, data: vec![0.0; height * width * channels], range_tag }
    }

    pub fn from_data(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
        range_tag: RangeTag,
    ) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "image data length {} does not match {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        Ok(ImageTensor { height, width, channels, data, range_tag })
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        let i = self.idx(y, x, c);
        self.data[i] = v;
    }

    pub fn is_empty(&self) -> bool {
        self.height == 0 || self.width == 0 || self.channels == 0
    }

    /// Copy of one channel as a contiguous H×W plane.
    pub fn channel_plane(&self, c: usize) -> Vec<f32> {
        let mut plane = Vec::with_capacity(self.height * self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                plane.push(self.get(y, x, c));
            }
        }
        plane
    }
}

/// Bilinear resampling with half-pixel-center alignment: output pixel `d`
/// reads source coordinate `(d + 0.5) * in/out - 0.5`, clamped to the image.
/// The result is a convex combination of input samples, so the range tag is
/// preserved. Resizing to the input size is an exact copy.
pub fn resize_bilinear(img: &ImageTensor, out_h: usize, out_w: usize) -> Result<ImageTensor> {
    if img.is_empty() {
        return Err(Error::Dimension("resize of empty image".into()));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::Dimension("resize target has a zero dimension".into()));
    }
    let (in_h, in_w, ch) = (img.height, img.width, img.channels);
    let mut out = ImageTensor::zeros(out_h, out_w, ch, img.range_tag);
    let sy_scale = in_h as f64 / out_h as f64;
    let sx_scale = in_w as f64 / out_w as f64;
    for y in 0..out_h {
        let sy = ((y as f64 + 0.5) * sy_scale - 0.5).clamp(0.0, (in_h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(in_h - 1);
        let dy = sy - y0 as f64;
        for x in 0..out_w {
            let sx = ((x as f64 + 0.5) * sx_scale - 0.5).clamp(0.0, (in_w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(in_w - 1);
            let dx = sx - x0 as f64;
            for c in 0..ch {
                let v00 = img.get(y0, x0, c) as f64;
                let v01 = img.get(y0, x1, c) as f64;
                let v10 = img.get(y1, x0, c) as f64;
                let v11 = img.get(y1, x1, c) as f64;
                let top = v00 * (1.0 - dx) + v01 * dx;
                let bot = v10 * (1.0 - dx) + v11 * dx;
                out.set(y, x, c, (top * (1.0 - dy) + bot * dy) as f32);
            }
        }
    }
    Ok(out)
}

/// Min-max affine map of all samples (channels jointly) onto the target
/// range. A constant image maps to the midpoint of the target range. With an
/// `Unbounded` target there is nothing to map onto; samples pass through and
/// only the tag changes.
pub fn normalize_range(img: &ImageTensor, target: RangeTag) -> Result<ImageTensor> {
    if img.is_empty() {
        return Err(Error::Dimension("normalize of empty image".into()));
    }
    let Some((lo, hi)) = target.bounds() else {
        let mut out = img.clone();
        out.range_tag = RangeTag::Unbounded;
        return Ok(out);
    };
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    for &v in &img.data {
        min = min.min(v);
        max = max.max(v);
    }
    let mut out = img.clone();
    out.range_tag = target;
    if min == max {
        let mid = (lo + hi) * 0.5;
        out.data.iter_mut().for_each(|v| *v = mid);
        return Ok(out);
    }
    let scale = (hi - lo) as f64 / (max as f64 - min as f64);
    for v in &mut out.data {
        // Clamp so rounding in the f32 cast cannot escape the declared range.
        *v = ((lo as f64 + (*v as f64 - min as f64) * scale) as f32).clamp(lo, hi);
    }
    Ok(out)
}

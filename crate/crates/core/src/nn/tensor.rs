//! Batched 4D activation tensor, layout `[batch][channel][row][col]`.

use crate::error::{Error, Result};
use crate::image::{ImageTensor, RangeTag};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Tensor4 {
    pub fn zeros(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Tensor4 { batch, channels, height, width, data: vec![0.0; batch * channels * height * width] }
    }

    pub fn from_data(
        batch: usize,
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if data.len() != batch * channels * height * width {
            return Err(Error::Dimension(format!(
                "tensor data length {} does not match {}x{}x{}x{}",
                data.len(),
                batch,
                channels,
                height,
                width
            )));
        }
        Ok(Tensor4 { batch, channels, height, width, data })
    }

    #[inline]
    pub fn idx(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.channels + c) * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.idx(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: f32) {
        let i = self.idx(b, c, y, x);
        self.data[i] = v;
    }

    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Batch a slice of equally shaped images, converting the channel-minor
    /// image layout to channel planes. Byte0255 samples are scaled to [0, 1];
    /// other tags pass through unchanged.
    pub fn from_images(images: &[ImageTensor]) -> Result<Tensor4> {
        let first = images
            .first()
            .ok_or_else(|| Error::Parameter("empty image batch".into()))?;
        let (h, w, ch) = (first.height, first.width, first.channels);
        let mut out = Tensor4::zeros(images.len(), ch, h, w);
        for (b, img) in images.iter().enumerate() {
            if (img.height, img.width, img.channels) != (h, w, ch) {
                return Err(Error::Dimension("ragged image batch".into()));
            }
            let scale = if img.range_tag == RangeTag::Byte0255 { 1.0 / 255.0 } else { 1.0 };
            for c in 0..ch {
                for y in 0..h {
                    for x in 0..w {
                        out.set(b, c, y, x, img.get(y, x, c) * scale);
                    }
                }
            }
        }
        Ok(out)
    }
}

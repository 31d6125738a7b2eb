//! Minimal binary PPM (P6) and PGM (P5) codec, maxval 255 only.
//!
//! Header grammar: magic, then width, height, maxval as ASCII decimals
//! separated by whitespace runs; `#` starts a comment through end of line;
//! a single whitespace byte separates the header from the raster.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{ImageTensor, RangeTag};

struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderScanner<'a> {
    fn skip_separators(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => return Ok(()),
                None => return Err(Error::Data("truncated image header".into())),
            }
        }
    }

    fn next_number(&mut self) -> Result<usize> {
        self.skip_separators()?;
        let start = self.pos;
        while matches!(self.bytes.get(self.pos), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Data("expected a number in image header".into()));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse()
            .map_err(|_| Error::Data(format!("header number {text} out of range")))
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageTensor> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::Data("not a binary PGM/PPM file".into())),
    };
    let mut scan = HeaderScanner { bytes, pos: 2 };
    let width = scan.next_number()?;
    let height = scan.next_number()?;
    let maxval = scan.next_number()?;
    if maxval != 255 {
        return Err(Error::Data(format!("unsupported maxval {maxval}, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Data("zero image dimension".into()));
    }
    // Exactly one whitespace byte before the raster.
    match bytes.get(scan.pos) {
        Some(b) if b.is_ascii_whitespace() => scan.pos += 1,
        _ => return Err(Error::Data("missing raster separator".into())),
    }
    let n = width * height * channels;
    let raster = bytes
        .get(scan.pos..scan.pos + n)
        .ok_or_else(|| Error::Data("raster shorter than header implies".into()))?;
    let data = raster.iter().map(|&b| b as f32).collect();
    ImageTensor::from_data(height, width, channels, data, RangeTag::Byte0255)
}

pub fn read_ppm(path: &Path) -> Result<ImageTensor> {
    decode_ppm(&std::fs::read(path)?)
}

/// Encode as P5 (1 channel) or P6 (3 channels); values are rounded and
/// clamped to bytes, so the tensor should carry the byte range tag.
pub fn encode_ppm(img: &ImageTensor) -> Result<Vec<u8>> {
    let magic = match img.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Data(format!("cannot encode {c}-channel image"))),
    };
    if img.range_tag != RangeTag::Byte0255 {
        return Err(Error::Data("image must be in the byte range to encode".into()));
    }
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

pub fn write_ppm(path: &Path, img: &ImageTensor) -> Result<()> {
    std::fs::write(path, encode_ppm(img)?)?;
    Ok(())
}

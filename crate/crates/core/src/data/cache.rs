//! Binary tensor cache: one file holding a homogeneous batch of float
//! image tensors plus per-tensor class labels.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8  b"AIGITENS"
//! version    u32
//! count      u32
//! height     u32
//! width      u32
//! channels   u32
//! range_tag  u8   (0 = unit01, 1 = byte0255, 2 = unbounded)
//! domain     u8   (0 = spatial, 1 = spectral)
//! reserved   u16  (zero)
//! data       count * height * width * channels f32, channel-minor
//! labels     count u8
//! checksum   u64  FNV-1a over every preceding byte
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::fft::spectral_image;
use crate::image::{ImageTensor, RangeTag};
use crate::metrics::Domain;

const MAGIC: &[u8; 8] = b"AIGITENS";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCache {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub range_tag: RangeTag,
    pub domain: Domain,
    /// Concatenated tensors, channel-minor within each.
    pub data: Vec<f32>,
    pub labels: Vec<u8>,
}

fn range_tag_byte(tag: RangeTag) -> u8 {
    match tag {
        RangeTag::Unit01 => 0,
        RangeTag::Byte0255 => 1,
        RangeTag::Unbounded => 2,
    }
}

fn range_tag_from_byte(b: u8) -> Result<RangeTag> {
    match b {
        0 => Ok(RangeTag::Unit01),
        1 => Ok(RangeTag::Byte0255),
        2 => Ok(RangeTag::Unbounded),
        _ => Err(Error::Data(format!("unknown range tag {b}"))),
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl TensorCache {
    /// Pack same-shaped tensors and labels. Shapes and range tags must be
    /// homogeneous.
    pub fn from_images(images: &[ImageTensor], labels: &[u8], domain: Domain) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::Data("cannot cache an empty image list".into()))?;
        if images.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        let (h, w, c, tag) = (first.height, first.width, first.channels, first.range_tag);
        let mut data = Vec::with_capacity(images.len() * h * w * c);
        for img in images {
            if (img.height, img.width, img.channels) != (h, w, c) {
                return Err(Error::Data("mixed tensor shapes in one cache".into()));
            }
            if img.range_tag != tag {
                return Err(Error::Data("mixed range tags in one cache".into()));
            }
            data.extend_from_slice(&img.data);
        }
        for &l in labels {
            if l > 1 {
                return Err(Error::Data(format!("label {l} outside {{0,1}}")));
            }
        }
        Ok(TensorCache {
            height: h,
            width: w,
            channels: c,
            range_tag: tag,
            domain,
            data,
            labels: labels.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn tensor_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Reconstruct tensor `i`.
    pub fn image(&self, i: usize) -> ImageTensor {
        let n = self.tensor_len();
        let slice = &self.data[i * n..(i + 1) * n];
        ImageTensor::from_data(
            self.height,
            self.width,
            self.channels,
            slice.to_vec(),
            self.range_tag,
        )
        .expect("cache slice has the recorded shape")
    }

    pub fn images(&self) -> Vec<ImageTensor> {
        (0..self.len()).map(|i| self.image(i)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.data.len() * 4 + self.labels.len() + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.channels as u32).to_le_bytes());
        out.push(range_tag_byte(self.range_tag));
        out.push(match self.domain {
            Domain::Spatial => 0,
            Domain::Spectral => 1,
        });
        out.extend_from_slice(&0u16.to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.labels);
        let sum = fnv1a(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 32 + 8 {
            return Err(Error::Data("tensor cache truncated".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        if fnv1a(body) != stored {
            return Err(Error::Data("tensor cache checksum mismatch".into()));
        }
        if &body[..8] != MAGIC {
            return Err(Error::Data("bad tensor cache magic".into()));
        }
        let u32_at = |off: usize| u32::from_le_bytes(body[off..off + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(Error::Data(format!("unsupported cache version {version}")));
        }
        let count = u32_at(12) as usize;
        let height = u32_at(16) as usize;
        let width = u32_at(20) as usize;
        let channels = u32_at(24) as usize;
        let range_tag = range_tag_from_byte(body[28])?;
        let domain = match body[29] {
            0 => Domain::Spatial,
            1 => Domain::Spectral,
            d => return Err(Error::Data(format!("unknown domain tag {d}"))),
        };
        let data_len = count * height * width * channels;
        let expect = 32 + data_len * 4 + count;
        if body.len() != expect {
            return Err(Error::Data(format!(
                "tensor cache body is {} bytes, header implies {expect}",
                body.len()
            )));
        }
        let mut data = Vec::with_capacity(data_len);
        let mut off = 32;
        for _ in 0..data_len {
            data.push(f32::from_le_bytes(body[off..off + 4].try_into().unwrap()));
            off += 4;
        }
        let labels = body[off..off + count].to_vec();
        for &l in &labels {
            if l > 1 {
                return Err(Error::Data(format!("label {l} outside {{0,1}}")));
            }
        }
        Ok(TensorCache {
            height,
            width,
            channels,
            range_tag,
            domain,
            data,
            labels,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        TensorCache::from_bytes(&std::fs::read(path)?)
    }
}

/// Derive the frequency-domain companion of a spatial cache: every tensor is
/// replaced by its log-magnitude spectrum, labels are carried over verbatim.
pub fn build_spectral_cache(spatial: &TensorCache) -> Result<TensorCache> {
    if spatial.domain != Domain::Spatial {
        return Err(Error::Data(
            "spectral cache must be derived from a spatial-domain cache".into(),
        ));
    }
    let mut images = Vec::with_capacity(spatial.len());
    for i in 0..spatial.len() {
        images.push(spectral_image(&spatial.image(i))?);
    }
    TensorCache::from_images(&images, &spatial.labels, Domain::Spectral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::{fft2d, zero_center_shift};
    use crate::rng::Rng;

    fn random_images(n: usize, h: usize, w: usize, c: usize, seed: u64) -> Vec<ImageTensor> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|_| {
                let data = (0..h * w * c)
                    .map(|_| (rng.uniform() * 255.0) as f32)
                    .collect();
                ImageTensor::from_data(h, w, c, data, RangeTag::Byte0255).unwrap()
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let images = random_images(5, 6, 7, 3, 11);
        let labels = [0u8, 1, 1, 0, 1];
        let cache = TensorCache::from_images(&images, &labels, Domain::Spatial).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.cache");
        cache.write(&path).unwrap();
        let loaded = TensorCache::read(&path).unwrap();
        assert_eq!(cache, loaded);
        for (a, b) in cache.images().iter().zip(loaded.images().iter()) {
            assert_eq!(a.data, b.data);
            assert_eq!(a.range_tag, b.range_tag);
        }
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let images = random_images(2, 4, 4, 1, 3);
        let cache = TensorCache::from_images(&images, &[0, 1], Domain::Spatial).unwrap();
        let mut bytes = cache.to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        let err = TensorCache::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let images = random_images(2, 4, 4, 1, 4);
        let cache = TensorCache::from_images(&images, &[0, 1], Domain::Spatial).unwrap();
        let bytes = cache.to_bytes();
        assert!(TensorCache::from_bytes(&bytes[..bytes.len() - 9]).is_err());
        assert!(TensorCache::from_bytes(&bytes[..20]).is_err());
    }

    #[test]
    fn mixed_shapes_rejected() {
        let mut images = random_images(2, 4, 4, 1, 5);
        images.push(random_images(1, 4, 5, 1, 6).pop().unwrap());
        assert!(TensorCache::from_images(&images, &[0, 1, 0], Domain::Spatial).is_err());
    }

    #[test]
    fn spectral_cache_matches_per_tensor_transform() {
        let images = random_images(4, 8, 8, 3, 21);
        let labels = [1u8, 0, 0, 1];
        let spatial = TensorCache::from_images(&images, &labels, Domain::Spatial).unwrap();
        let spectral = build_spectral_cache(&spatial).unwrap();

        assert_eq!(spectral.domain, Domain::Spectral);
        assert_eq!(spectral.labels, spatial.labels);
        assert_eq!(spectral.range_tag, RangeTag::Byte0255);

        // Oracle: compose the stages by hand for each tensor and compare
        // with the library path bit for bit.
        for (i, img) in images.iter().enumerate() {
            let want = spectral_image(img).unwrap();
            assert_eq!(spectral.image(i).data, want.data, "tensor {i}");
        }

    }

    #[test]
    fn spectral_cache_matches_raw_dft_composition() {
        // Single channel keeps the normalization bounds local to the one
        // plane, so the oracle can recompute them directly.
        let images = random_images(2, 8, 8, 1, 22);
        let spatial = TensorCache::from_images(&images, &[0, 1], Domain::Spatial).unwrap();
        let spectral = build_spectral_cache(&spatial).unwrap();

        let img = &images[0];
        let f = fft2d(img.height, img.width, &img.data).unwrap();
        let shifted = zero_center_shift(&f);
        let logmag: Vec<f64> = (0..shifted.re.len())
            .map(|i| (shifted.re[i].hypot(shifted.im[i])).ln_1p())
            .collect();
        let (lo, hi) = (
            logmag.iter().cloned().fold(f64::INFINITY, f64::min),
            logmag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        let got = spectral.image(0);
        for (p, &v) in logmag.iter().enumerate() {
            let want = if hi > lo { (v - lo) / (hi - lo) * 255.0 } else { 127.5 };
            let have = got.data[p] as f64;
            assert!((have - want).abs() < 1e-3, "pixel {p}: {have} vs {want}");
        }
    }

    #[test]
    fn spectral_of_spectral_is_rejected() {
        let images = random_images(2, 8, 8, 1, 9);
        let spatial = TensorCache::from_images(&images, &[0, 1], Domain::Spatial).unwrap();
        let spectral = build_spectral_cache(&spatial).unwrap();
        assert!(build_spectral_cache(&spectral).is_err());
    }
}

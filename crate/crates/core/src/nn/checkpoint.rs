//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!   magic "AIGICKPT" | format version u32 | input shape c,h,w u32×3 |
//!   layer count u32 | per layer: kind tag u8 + five u32 shape fields |
//!   param count u64 | params f32×n | trailing u64 = param byte length.
//! The trailing length doubles as a truncation check.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::graph::NetworkGraph;
use crate::nn::layer::LayerSpec;

const MAGIC: &[u8; 8] = b"AIGICKPT";
const VERSION: u32 = 1;

fn spec_fields(spec: &LayerSpec) -> (u8, [u32; 5]) {
    match *spec {
        LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
            (0, [in_ch as u32, out_ch as u32, kernel as u32, stride as u32, padding as u32])
        }
        LayerSpec::DepthwiseConv2d { channels, kernel, stride, padding } => {
            (1, [channels as u32, 0, kernel as u32, stride as u32, padding as u32])
        }
        LayerSpec::PointwiseConv2d { in_ch, out_ch } => (2, [in_ch as u32, out_ch as u32, 0, 0, 0]),
        LayerSpec::ReLU => (3, [0; 5]),
        LayerSpec::MaxPool2d { kernel, stride } => (4, [0, 0, kernel as u32, stride as u32, 0]),
        LayerSpec::GlobalAvgPool => (5, [0; 5]),
        LayerSpec::Linear { in_features, out_features } => {
            (6, [in_features as u32, out_features as u32, 0, 0, 0])
        }
        LayerSpec::BatchNorm2d { channels } => (7, [channels as u32, 0, 0, 0, 0]),
    }
}

fn spec_from_fields(tag: u8, f: [u32; 5]) -> Result<LayerSpec> {
    let s = |v: u32| v as usize;
    Ok(match tag {
        0 => LayerSpec::Conv2d {
            in_ch: s(f[0]),
            out_ch: s(f[1]),
            kernel: s(f[2]),
            stride: s(f[3]),
            padding: s(f[4]),
        },
        1 => LayerSpec::DepthwiseConv2d {
            channels: s(f[0]),
            kernel: s(f[2]),
            stride: s(f[3]),
            padding: s(f[4]),
        },
        2 => LayerSpec::PointwiseConv2d { in_ch: s(f[0]), out_ch: s(f[1]) },
        3 => LayerSpec::ReLU,
        4 => LayerSpec::MaxPool2d { kernel: s(f[2]), stride: s(f[3]) },
        5 => LayerSpec::GlobalAvgPool,
        6 => LayerSpec::Linear { in_features: s(f[0]), out_features: s(f[1]) },
        7 => LayerSpec::BatchNorm2d { channels: s(f[0]) },
        other => return Err(Error::Data(format!("unknown layer tag {other} in checkpoint"))),
    })
}

pub fn save_checkpoint(net: &NetworkGraph, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let (c, h, wd) = net.input_shape();
    for dim in [c, h, wd] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    w.write_all(&(net.specs().len() as u32).to_le_bytes())?;
    for spec in net.specs() {
        let (tag, fields) = spec_fields(spec);
        w.write_all(&[tag])?;
        for f in fields {
            w.write_all(&f.to_le_bytes())?;
        }
    }
    w.write_all(&(net.params.len() as u64).to_le_bytes())?;
    for p in &net.params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.write_all(&((net.params.len() * 4) as u64).to_le_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkGraph> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data("bad checkpoint magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Data(format!("unsupported checkpoint version {version}")));
    }
    let (c, h, w) = (read_u32(&mut r)? as usize, read_u32(&mut r)? as usize, read_u32(&mut r)? as usize);
    let layer_count = read_u32(&mut r)? as usize;
    let mut specs = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let mut fields = [0u32; 5];
        for f in &mut fields {
            *f = read_u32(&mut r)?;
        }
        specs.push(spec_from_fields(tag[0], fields)?);
    }
    let param_count = read_u64(&mut r)? as usize;
    let mut net = NetworkGraph::new(specs, (c, h, w))?;
    if net.param_count() != param_count {
        return Err(Error::Data(format!(
            "checkpoint declares {param_count} params, graph needs {}",
            net.param_count()
        )));
    }
    let mut buf = vec![0u8; param_count * 4];
    r.read_exact(&mut buf)?;
    for (i, chunk) in buf.chunks_exact(4).enumerate() {
        net.params[i] = f32::from_le_bytes(chunk.try_into().unwrap());
    }
    let trailer = read_u64(&mut r)?;
    if trailer != (param_count * 4) as u64 {
        return Err(Error::Data("checkpoint length check failed".into()));
    }
    Ok(net)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::tiny_detector_arch;
    use crate::nn::tensor::Tensor4;
    use crate::rng::Rng;

    #[test]
    fn round_trip_preserves_forward_bit_exactly() {
        let mut rng = Rng::new(77);
        let mut net = tiny_detector_arch(32, 32).unwrap();
        net.init_params(&mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&net, &path).unwrap();
        let restored = load_checkpoint(&path).unwrap();
        assert_eq!(net, restored);

        let input = Tensor4::from_data(
            2,
            3,
            32,
            32,
            (0..2 * 3 * 32 * 32).map(|_| rng.uniform() as f32).collect(),
        )
        .unwrap();
        let a = net.forward_logits(&input).unwrap();
        let b = restored.forward_logits(&input).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_magic_rejected() {
        let net = tiny_detector_arch(16, 16).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&net, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn truncated_file_rejected() {
        let net = tiny_detector_arch(16, 16).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&net, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 6]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}

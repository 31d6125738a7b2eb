//! Stock compact detector architecture.

use crate::error::Result;
use crate::nn::graph::NetworkGraph;
use crate::nn::layer::LayerSpec;

/// Small depthwise-separable CNN: stem conv 3→8 stride 2, three separable
/// blocks doubling channels to 64 (each stride 2), global average pool,
/// linear head to 2 logits. 3,714 parameters; about 5.6M MACs at 256×256.
/// Works for any input with dims ≥ 16; channel count is fixed at 3.
pub fn tiny_detector_arch(height: usize, width: usize) -> Result<NetworkGraph> {
    let mut specs = vec![
        LayerSpec::Conv2d { in_ch: 3, out_ch: 8, kernel: 3, stride: 2, padding: 1 },
        LayerSpec::ReLU,
    ];
    let mut ch = 8;
    for _ in 0..3 {
        specs.push(LayerSpec::DepthwiseConv2d { channels: ch, kernel: 3, stride: 2, padding: 1 });
        specs.push(LayerSpec::ReLU);
        specs.push(LayerSpec::PointwiseConv2d { in_ch: ch, out_ch: ch * 2 });
        specs.push(LayerSpec::ReLU);
        ch *= 2;
    }
    specs.push(LayerSpec::GlobalAvgPool);
    specs.push(LayerSpec::Linear { in_features: 64, out_features: 2 });
    NetworkGraph::new(specs, (3, height, width))
}

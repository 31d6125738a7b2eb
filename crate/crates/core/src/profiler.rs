//! Static parameter and FLOP accounting over a network graph.
//!
//! Conventions: convolution and linear layers cost 2 FLOPs per
//! multiply-accumulate (bias adds not counted); ReLU and pooling cost 1 op
//! per output element; batch normalization costs 2 ops per element (scale
//! and shift). MACs are reported alongside raw FLOPs so either counting
//! convention can be matched.

use crate::error::Result;
use crate::nn::graph::NetworkGraph;
use crate::nn::layer::{LayerSpec, Shape};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCost {
    pub index: usize,
    pub kind: &'static str,
    pub params: u64,
    pub macs: u64,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    pub params: u64,
    pub macs: u64,
    pub flops: u64,
    pub per_layer: Vec<LayerCost>,
}

fn layer_cost(index: usize, spec: &LayerSpec, out_shape: Shape) -> LayerCost {
    let out_elems = (out_shape.0 * out_shape.1 * out_shape.2) as u64;
    let (macs, extra_ops) = match *spec {
        LayerSpec::Conv2d { in_ch, kernel, .. } => {
            ((kernel * kernel * in_ch) as u64 * out_elems, 0)
        }
        LayerSpec::DepthwiseConv2d { kernel, .. } => ((kernel * kernel) as u64 * out_elems, 0),
        LayerSpec::PointwiseConv2d { in_ch, .. } => (in_ch as u64 * out_elems, 0),
        LayerSpec::Linear { in_features, out_features } => {
            ((in_features * out_features) as u64, 0)
        }
        LayerSpec::ReLU | LayerSpec::MaxPool2d { .. } | LayerSpec::GlobalAvgPool => (0, out_elems),
        LayerSpec::BatchNorm2d { .. } => (0, 2 * out_elems),
    };
    LayerCost {
        index,
        kind: spec.kind_name(),
        params: spec.param_count() as u64,
        macs,
        flops: 2 * macs + extra_ops,
    }
}

/// Per-layer and total parameter/MAC/FLOP counts for one forward pass of a
/// single sample at the graph's input shape.
pub fn profile(net: &NetworkGraph) -> Result<CostReport> {
    let mut shape = net.input_shape();
    let mut per_layer = Vec::with_capacity(net.specs().len());
    for (i, spec) in net.specs().iter().enumerate() {
        let out = spec.out_shape(shape)?;
        per_layer.push(layer_cost(i, spec, out));
        shape = out;
    }
    Ok(CostReport {
        params: per_layer.iter().map(|l| l.params).sum(),
        macs: per_layer.iter().map(|l| l.macs).sum(),
        flops: per_layer.iter().map(|l| l.flops).sum(),
        per_layer,
    })
}

impl CostReport {
    /// Aligned text table, one row per layer plus totals.
    pub fn to_table(&self) -> String {
        let mut out = String::from("layer  kind         params        macs       flops\n");
        for l in &self.per_layer {
            out.push_str(&format!(
                "{:<5}  {:<10} {:>8} {:>11} {:>11}\n",
                l.index, l.kind, l.params, l.macs, l.flops
            ));
        }
        out.push_str(&format!(
            "total             {:>8} {:>11} {:>11}\n",
            self.params, self.macs, self.flops
        ));
        out
    }
}

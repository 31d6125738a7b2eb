//! Network graph: an ordered layer list over a flat parameter store, with
//! cached-activation forward and reverse-mode backward passes.

use crate::error::{Error, Result};
use crate::nn::layer::{backward_layer, forward_layer, LayerSpec, Shape};
use crate::nn::tensor::Tensor4;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    specs: Vec<LayerSpec>,
    /// Sample input shape the graph was validated against.
    input_shape: Shape,
    /// Flat parameter store; layer `i` owns `offsets[i]..offsets[i+1]`.
    pub params: Vec<f32>,
    offsets: Vec<usize>,
}

/// Activations recorded by [`NetworkGraph::forward`]; entry 0 is the input,
/// entry `i + 1` the output of layer `i`.
#[derive(Debug)]
pub struct ForwardCache {
    pub activations: Vec<Tensor4>,
}

impl ForwardCache {
    pub fn output(&self) -> &Tensor4 {
        self.activations.last().expect("cache always holds the input")
    }
}

impl NetworkGraph {
    /// Validate the layer chain against `input_shape` and allocate
    /// zero-initialized parameters.
    pub fn new(specs: Vec<LayerSpec>, input_shape: Shape) -> Result<NetworkGraph> {
        if specs.is_empty() {
            return Err(Error::Parameter("network needs at least one layer".into()));
        }
        let mut shape = input_shape;
        let mut offsets = vec![0usize];
        for spec in &specs {
            shape = spec.out_shape(shape)?;
            offsets.push(offsets.last().unwrap() + spec.param_count());
        }
        let total = *offsets.last().unwrap();
        Ok(NetworkGraph { specs, input_shape, params: vec![0.0; total], offsets })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn output_shape(&self) -> Shape {
        let mut shape = self.input_shape;
        for spec in &self.specs {
            shape = spec.out_shape(shape).expect("validated at construction");
        }
        shape
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn layer_params(&self, i: usize) -> &[f32] {
        &self.params[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn layer_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// He-normal initialization: weights with std `sqrt(2/fan_in)`, biases
    /// zero, BatchNorm gamma one / beta zero.
    pub fn init_params(&mut self, rng: &mut Rng) {
        for (i, spec) in self.specs.clone().iter().enumerate() {
            let range = self.layer_range(i);
            let slice = &mut self.params[range];
            match *spec {
                LayerSpec::Conv2d { in_ch, out_ch, kernel, .. } => {
                    let fan_in = kernel * kernel * in_ch;
                    he_fill(slice, kernel * kernel * in_ch * out_ch, fan_in, rng);
                }
                LayerSpec::DepthwiseConv2d { channels, kernel, .. } => {
                    let fan_in = kernel * kernel;
                    he_fill(slice, kernel * kernel * channels, fan_in, rng);
                }
                LayerSpec::PointwiseConv2d { in_ch, out_ch } => {
                    he_fill(slice, in_ch * out_ch, in_ch, rng);
                }
                LayerSpec::Linear { in_features, out_features } => {
                    he_fill(slice, in_features * out_features, in_features, rng);
                }
                LayerSpec::BatchNorm2d { channels } => {
                    slice[..channels].fill(1.0);
                    slice[channels..].fill(0.0);
                }
                LayerSpec::ReLU | LayerSpec::MaxPool2d { .. } | LayerSpec::GlobalAvgPool => {}
            }
        }
    }

    /// Run all layers, recording every activation for the backward pass.
    pub fn forward(&self, input: &Tensor4) -> Result<ForwardCache> {
        if (input.channels, input.height, input.width) != self.input_shape {
            return Err(Error::Dimension(format!(
                "input shape {}x{}x{} does not match graph input {:?}",
                input.channels, input.height, input.width, self.input_shape
            )));
        }
        let mut activations = Vec::with_capacity(self.specs.len() + 1);
        activations.push(input.clone());
        for (i, spec) in self.specs.iter().enumerate() {
            let out = forward_layer(spec, self.layer_params(i), activations.last().unwrap())?;
            activations.push(out);
        }
        Ok(ForwardCache { activations })
    }

    /// Forward to a `[batch, 2]` logit matrix. Errors if the graph head does
    /// not produce exactly two outputs per sample or any logit is non-finite.
    pub fn forward_logits(&self, input: &Tensor4) -> Result<Vec<f32>> {
        let cache = self.forward(input)?;
        self.logits_from_cache(&cache)
    }

    pub fn logits_from_cache(&self, cache: &ForwardCache) -> Result<Vec<f32>> {
        let out = cache.output();
        if out.sample_len() != 2 {
            return Err(Error::Dimension(format!(
                "classifier head must emit 2 outputs per sample, got {}",
                out.sample_len()
            )));
        }
        if !out.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite logit in forward pass".into()));
        }
        Ok(out.data.clone())
    }

    /// Backpropagate `grad_output` (gradient w.r.t. the final activation)
    /// through the cached forward pass. Returns the full parameter gradient.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Tensor4) -> Result<Vec<f32>> {
        if cache.activations.len() != self.specs.len() + 1 {
            return Err(Error::State(format!(
                "forward cache holds {} activations, expected {}",
                cache.activations.len(),
                self.specs.len() + 1
            )));
        }
        let mut grads = vec![0.0f32; self.params.len()];
        let mut upstream = grad_output.clone();
        for i in (0..self.specs.len()).rev() {
            let range = self.layer_range(i);
            let (params, grad_slice) = (&self.params[range.clone()], &mut grads[range]);
            upstream = backward_layer(
                &self.specs[i],
                params,
                &cache.activations[i],
                &upstream,
                grad_slice,
            )?;
        }
        Ok(grads)
    }

    /// Class decision per sample: argmax of the two logits, ties resolved
    /// toward class 0.
    pub fn predict_labels(logits: &[f32]) -> Vec<u8> {
        logits.chunks_exact(2).map(|l| u8::from(l[1] > l[0])).collect()
    }
}

fn he_fill(slice: &mut [f32], weight_count: usize, fan_in: usize, rng: &mut Rng) {
    let std = (2.0 / fan_in as f64).sqrt();
    for w in &mut slice[..weight_count] {
        *w = (rng.normal() * std) as f32;
    }
    slice[weight_count..].fill(0.0);
}

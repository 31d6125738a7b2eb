//! End-to-end training loop: shuffled mini-batches, Adam, plateau LR
//! scheduling, early stopping, and best-checkpoint restore. Single-threaded
//! and fully determined by the config seed.

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::nn::graph::NetworkGraph;
use crate::nn::loss::bce_loss;
use crate::nn::optim::OptimizerState;
use crate::nn::schedule::{EarlyStopState, SchedulerState};
use crate::nn::tensor::Tensor4;
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub patience: usize,
    pub lr_factor: f64,
    pub early_stop_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            lr: 1e-4,
            seed: 0,
            patience: 5,
            lr_factor: 0.1,
            early_stop_window: 10,
        }
    }
}

/// Labeled samples pre-converted to channel-plane unit-range layout, ready
/// for batching.
#[derive(Debug, Clone)]
pub struct SampleSet {
    data: Vec<f32>,
    labels: Vec<u8>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl SampleSet {
    pub fn from_images(images: &[ImageTensor], labels: &[u8]) -> Result<SampleSet> {
        if images.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} images vs {} labels",
                images.len(),
                labels.len()
            )));
        }
        if images.is_empty() {
            return Err(Error::Parameter("empty sample set".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Parameter(format!("label {bad} outside {{0, 1}}")));
        }
        let batch = Tensor4::from_images(images)?;
        Ok(SampleSet {
            data: batch.data,
            labels: labels.to_vec(),
            channels: batch.channels,
            height: batch.height,
            width: batch.width,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Assemble the samples at `indices` into one batch tensor.
    pub fn gather(&self, indices: &[usize]) -> (Tensor4, Vec<u8>) {
        let sl = self.sample_len();
        let mut out = Tensor4::zeros(indices.len(), self.channels, self.height, self.width);
        let mut labels = Vec::with_capacity(indices.len());
        for (b, &i) in indices.iter().enumerate() {
            out.data[b * sl..(b + 1) * sl].copy_from_slice(&self.data[i * sl..(i + 1) * sl]);
            labels.push(self.labels[i]);
        }
        (out, labels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub stopped_early: bool,
}

/// Percent of samples whose argmax prediction matches the label.
pub fn evaluate_accuracy(net: &NetworkGraph, set: &SampleSet, batch_size: usize) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Parameter("empty evaluation set".into()));
    }
    let scores = predict_scores(net, set, batch_size)?;
    let correct = scores
        .iter()
        .zip(set.labels())
        .filter(|(&s, &l)| u8::from(s >= 0.5) == l)
        .count();
    Ok(correct as f64 / set.len() as f64 * 100.0)
}

/// Positive-class (label 1) softmax probability per sample.
pub fn predict_scores(net: &NetworkGraph, set: &SampleSet, batch_size: usize) -> Result<Vec<f64>> {
    if batch_size == 0 {
        return Err(Error::Parameter("batch size must be at least 1".into()));
    }
    let mut scores = Vec::with_capacity(set.len());
    let indices: Vec<usize> = (0..set.len()).collect();
    for chunk in indices.chunks(batch_size) {
        let (batch, _) = set.gather(chunk);
        let logits = net.forward_logits(&batch)?;
        for pair in logits.chunks_exact(2) {
            let (l0, l1) = (pair[0] as f64, pair[1] as f64);
            let m = l0.max(l1);
            let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
            scores.push(e1 / (e0 + e1));
        }
    }
    Ok(scores)
}

/// Train `net` in place, leaving it holding the parameters of the epoch with
/// the highest validation accuracy.
pub fn train(
    net: &mut NetworkGraph,
    train_set: &SampleSet,
    val_set: &SampleSet,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Parameter("training needs non-empty train and val sets".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Parameter("batch size must be at least 1".into()));
    }
    if cfg.epochs == 0 || cfg.epochs > 100 {
        return Err(Error::Parameter(format!("epochs {} outside 1..=100", cfg.epochs)));
    }
    let out_shape = net.output_shape();
    if out_shape.0 * out_shape.1 * out_shape.2 != 2 {
        return Err(Error::Dimension(format!(
            "classifier head must emit 2 outputs, got {out_shape:?}"
        )));
    }

    let rng = Rng::new(cfg.seed);
    let mut opt = OptimizerState::adam(net.param_count(), cfg.lr);
    let mut sched = SchedulerState::new(cfg.patience, cfg.lr_factor);
    let mut stop = EarlyStopState::new(cfg.early_stop_window);
    let mut log = Vec::new();
    let mut stopped_early = false;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        let mut epoch_rng = rng.child(epoch as u64);
        epoch_rng.shuffle(&mut order);

        let mut loss_sum = 0.0f64;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (batch, labels) = train_set.gather(chunk);
            let cache = net.forward(&batch)?;
            let logits = net.logits_from_cache(&cache)?;
            let (loss, grad_logits) = bce_loss(&logits, &labels)?;
            let grad_out = Tensor4::from_data(labels.len(), 2, 1, 1, grad_logits)?;
            let grads = net.backward(&cache, &grad_out)?;
            opt.adam_step(&mut net.params, &grads)?;
            loss_sum += loss;
            batches += 1;
        }

        let val_acc = evaluate_accuracy(net, val_set, cfg.batch_size)?;
        opt.lr = sched.step(val_acc, opt.lr);
        log.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_acc,
            lr: opt.lr,
        });
        if stop.observe(epoch, val_acc, &net.params) {
            stopped_early = true;
            break;
        }
    }

    net.params.copy_from_slice(&stop.best_params);
    Ok(TrainReport {
        log,
        best_epoch: stop.best_epoch,
        best_val_acc: stop.best_metric,
        stopped_early,
    })
}

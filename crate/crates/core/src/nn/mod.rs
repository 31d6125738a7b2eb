//! Minimal trainable neural-network engine: layers with reverse-mode
//! differentiation, two-logit cross-entropy, Adam, plateau LR scheduling,
//! early stopping, checkpoints, and finite-difference gradient checking.

pub mod arch;
pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod layer;
pub mod loss;
pub mod optim;
pub mod schedule;
pub mod tensor;
pub mod train;

pub use arch::tiny_detector_arch;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use graph::{ForwardCache, NetworkGraph};
pub use layer::LayerSpec;
pub use loss::bce_loss;
pub use optim::OptimizerState;
pub use schedule::{EarlyStopState, SchedulerState};
pub use tensor::Tensor4;
pub use train::{evaluate_accuracy, predict_scores, train, SampleSet, TrainConfig, TrainReport};

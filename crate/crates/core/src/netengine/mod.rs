//! Minimal feed-forward network engine.
//!
//! Networks are chains of dense layers with ReLU between consecutive dense
//! layers. Everything runs in `f64` so input gradients can be checked against
//! finite differences. Training is plain mini-batch SGD with momentum and a
//! step learning-rate schedule, emitting periodic checkpoints plus the best
//! model by test accuracy.

mod checkpoint;
mod network;
mod schedule;
mod softmax;
mod tensor;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{
    forward, input_gradient, DenseParams, LayerSpec, NetworkParams, NetworkSpec,
};
pub use schedule::{lr_at_epoch, sgd_momentum_step, Augmentation, TrainSchedule};
pub use softmax::{argmax, softmax_stable};
pub use tensor::Tensor;
pub use train::{train, EpochLog, Labeled, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training schedule: {0}")]
    InvalidSchedule(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: u32, batch: usize },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("checkpoint format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;

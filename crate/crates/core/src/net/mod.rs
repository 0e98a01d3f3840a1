//! 1D-CNN gesture classifier: feature layout, network, training and
//! evaluation.
//!
//! A gesture sample is a 50 × 325 matrix: one row per radar frame, holding
//! up to 65 detections of 5 features each. Convolutions run along time with
//! the 325 columns as input channels.

mod checkpoint;
mod eval;
mod features;
mod gemm;
mod model;
mod shape;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use eval::{evaluate, EvalReport};
pub use features::{featurize, FeatureMatrix, Normalization};
pub use gemm::Scalar;
pub use model::{softmax, Gradients, Network, Prediction};
pub use shape::{Architecture, ShapeTrace, DEFAULT_TRACE};
pub use train::{accuracy, train, EpochLog, LabeledSet, TrainConfig, TrainOutcome};

use crate::radar::Detection;

/// Frames per gesture window.
pub const MAX_FRAMES: usize = 50;
/// Detection slots per frame.
pub const MAX_OBJECTS: usize = 65;
/// Columns of a feature matrix.
pub const FRAME_FEATURES: usize = MAX_OBJECTS * Detection::FEATURES;
/// Softmax probability needed before a gesture is reported.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("input is {actual} values, network expects {expected}")]
    InputShape { expected: usize, actual: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

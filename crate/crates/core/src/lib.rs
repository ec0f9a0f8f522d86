//! A from-scratch LeNet-5 engine for classifying grayscale CT slices.
//!
//! The crate covers the whole pipeline: PGM ingestion and preprocessing,
//! the sigmoid / average-pooling LeNet-5 with hand-written backward passes,
//! cross-entropy and focal loss, plain SGD training, checkpointing, and the
//! accuracy / sensitivity / specificity metrics used to report results.
//!
//! Everything runs in `f64` on the CPU. Training is single-threaded and
//! bit-reproducible for a fixed seed; evaluation may fan out across threads
//! without changing its results.

pub mod checkpoint;
pub mod curves;
pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use error::{Error, Result};
pub use loss::{cross_entropy, focal_loss, FocalConfig, LossKind, LossOutput};
pub use nn::LeNetModel;
pub use tensor::Tensor;
pub use train::{
    evaluate, sgd_step, train, train_with_observer, EpochRecord, Evaluation, TrainConfig,
};

//! Differentiable layers, the four model families, training and
//! cross-validation. Everything runs in `f64` on the CPU.

pub mod checkpoint;
pub mod cv;
pub mod layers;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use cv::{cross_validate, cross_validate_with, fold_assignment, CvReport, FoldResult, Metric};
pub use model::{argmax, Architecture, Input, Model, ModelConfig, Target};
pub use optim::{Optimizer, OptimizerKind};
pub use tensor::Tensor;
pub use train::{accuracy, evaluate_loss, train, EpochLog, Example, Objective, TrainConfig, Trained};

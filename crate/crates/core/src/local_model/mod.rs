//! Local models trained by each participant.
//!
//! [`LinearSoftmax`] is the classifier the federated pipeline trains on
//! synthetic Gaussian-class data. [`LinearRegression`] is a squared-loss
//! model used to check federated against centralized steps. [`capsule`]
//! holds the squashing, routing-softmax and routing-by-agreement operations
//! of a capsule layer, exercised standalone.

pub mod capsule;
mod data;
mod linear;

use core::fmt;

pub use capsule::{capsule_forward, routing_softmax, squash, CapsuleLayerSpec};
pub use data::{gen_synthetic, Dataset, SyntheticSpec};
pub use linear::{
    evaluate_accuracy, loss_and_grad, train_local, LinearRegression, LinearSoftmax, TrainParams,
};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    EmptyDataset,
    DimensionError {
        expected: usize,
        found: usize,
    },
    SpecError(&'static str),
    /// Training produced a non-finite loss or weight.
    DivergenceError {
        iteration: usize,
    },
    InvalidLabel {
        index: usize,
        label: usize,
    },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::EmptyDataset => write!(f, "dataset is empty"),
            ModelError::DimensionError { expected, found } => {
                write!(f, "expected dimension {expected}, found {found}")
            }
            ModelError::SpecError(why) => write!(f, "invalid model or data spec: {why}"),
            ModelError::DivergenceError { iteration } => {
                write!(f, "training diverged at iteration {iteration}")
            }
            ModelError::InvalidLabel { index, label } => {
                write!(f, "sample {index} has out-of-range label {label}")
            }
        }
    }
}

impl core::error::Error for ModelError {}

//! Alternating generator/classifier optimization, evaluation and
//! cross-validation.

mod data;
pub mod gradcheck;
mod metrics;
mod trainer;

use thiserror::Error;

use crate::autodiff::TensorError;
use crate::model::ModelError;

pub use data::{cosine_adjacency, dev_split, single_split, stratified_folds, Dataset, FoldSplit, Sample, Standardizer};
pub use metrics::{mean_sd, Metrics};
pub use trainer::{
    cross_validate, evaluate, fixed_graph_baseline, inference_adjacency, learned_loss_on_tape, lower_step, prepare,
    run_iteration, train, train_single_split, train_with, upper_step, CvReport, Evaluation, FoldResult, GraphMode,
    IterationRecord, Prepared, StepOutcome, TrainConfig, TrainState,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("fold {fold} is too small ({images} images over {folds} folds)")]
    FoldTooSmall { fold: usize, images: usize, folds: usize },
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Model(ModelError::Tensor(e))
    }
}

//! Classifier (GCN + jumping-knowledge head) and the pairwise adjacency
//! generator, both as parameter containers plus tape-based forward passes.

mod generator;
mod gnn;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Matrix, TensorError};

pub use generator::{
    adjacency_on_tape, eval_adjacency, gumbel_noise, gumbel_sigmoid, pairwise_logits, pairwise_logits_on_tape,
    sparsity_penalty, symmetrize_self_loop, AdjacencyMode, GeneratorParams, GeneratorVars, TemperatureSchedule,
    GUMBEL_U_CLAMP,
};
pub use gnn::{
    argmax, classifier_logits_on_tape, gcn_forward, gcn_on_tape, jk_classify, jk_logits_on_tape, normalize_adjacency,
    predict, predict_proba, ClassifierParams, ClassifierVars,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("adjacency is not symmetric at ({0}, {1})")]
    AsymmetricInput(usize, usize),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("expected a square matrix, got {0}x{1}")]
    NonSquare(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Layer widths for both networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub input_dim: usize,
    pub gcn_dims: Vec<usize>,
    /// Hidden widths of the head; the output layer (width `classes`) is implied.
    pub head_dims: Vec<usize>,
    pub classes: usize,
    /// Hidden widths of the generator; the scalar output layer is implied.
    pub generator_dims: Vec<usize>,
    pub dropout: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            input_dim: crate::features::N_FEATURES,
            gcn_dims: vec![128, 128, 128],
            head_dims: vec![128],
            classes: 3,
            generator_dims: vec![128, 64],
            dropout: 0.2,
        }
    }
}

impl ArchConfig {
    /// Wider preset whose total parameter count lands near 0.86M.
    pub fn large() -> Self {
        Self {
            gcn_dims: vec![256, 256, 256],
            head_dims: vec![512, 256],
            generator_dims: vec![512, 256],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        if self.gcn_dims.is_empty() {
            return bad("at least one GCN layer is required");
        }
        if self.classes < 2 {
            return bad("at least two classes are required");
        }
        if self.gcn_dims.iter().chain(&self.head_dims).chain(&self.generator_dims).any(|&w| w == 0) {
            return bad("layer widths must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn classifier_param_count(&self) -> usize {
        let mut count = 0;
        let mut prev = self.input_dim;
        for &h in &self.gcn_dims {
            count += prev * h;
            prev = h;
        }
        let mut prev: usize = self.gcn_dims.iter().sum();
        for &h in self.head_dims.iter().chain(std::iter::once(&self.classes)) {
            count += prev * h + h;
            prev = h;
        }
        count
    }

    pub fn generator_param_count(&self) -> usize {
        let mut count = 0;
        let mut prev = 2 * self.input_dim;
        for &h in self.generator_dims.iter().chain(std::iter::once(&1)) {
            count += prev * h + h;
            prev = h;
        }
        count
    }

    pub fn total_param_count(&self) -> usize {
        self.classifier_param_count() + self.generator_param_count()
    }
}

/// Glorot-uniform weight matrix.
pub(crate) fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

/// A named, ordered list of tensors, the common currency of the optimizer and
/// the checkpoint format.
pub trait ParamList {
    fn tensors(&self) -> Vec<&Matrix>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;
    fn names(&self) -> Vec<String>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

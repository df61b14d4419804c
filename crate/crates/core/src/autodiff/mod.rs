//! Dense `f64` matrices with a reverse-mode tape.
//!
//! Every forward op checks its output for non-finite entries so a NaN shows
//! up at the op that produced it rather than three layers later.

mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{grad_check, grad_check_many, grad_check_on};
pub use matrix::Matrix;
pub(crate) use tape::{sigmoid, softmax_in_place};
pub use tape::{Gradients, OpKind, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch in {op:?}: {left:?} vs {right:?}")]
    ShapeMismatch { op: OpKind, left: (usize, usize), right: (usize, usize) },
    #[error("non-finite value produced by {0:?}")]
    NonFinite(OpKind),
    #[error("loss must be 1x1, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("expected a square matrix, got {0}x{1}")]
    NonSquare(usize, usize),
    #[error("{0}")]
    InvalidArgument(String),
}

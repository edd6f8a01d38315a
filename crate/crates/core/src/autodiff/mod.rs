//! Small reverse-mode automatic differentiation over dense matrices, with
//! the gather and pooling primitives message passing needs.

mod adam;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward needs a 1×1 loss, got {0}×{1}")]
    NonScalarLoss(usize, usize),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

#[cfg(test)]
mod tests;

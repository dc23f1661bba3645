//! Dense `f64` tensors with tape-based reverse-mode differentiation.

mod gradcheck;
mod ops;
mod tape;
mod tensor;

use thiserror::Error;

pub use gradcheck::{finite_difference_check, FD_EPSILON};
pub use ops::{forward, Op, LN_FLOOR};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;


#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("{op}: {detail} (input shapes {shapes:?})")]
    Shape {
        op: &'static str,
        shapes: Vec<Vec<usize>>,
        detail: String,
    },
    #[error("invalid tensor shape {shape:?}")]
    InvalidShape { shape: Vec<usize> },
    #[error("shape {shape:?} does not hold {len} values")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("loss must be a scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}

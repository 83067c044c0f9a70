//! Reverse-mode automatic differentiation over small dense matrices,
//! including gradients of gradients, plus the Adam optimiser.

mod adam;
mod graph;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{Gradients, Graph, Var};
pub use tensor::{Shape, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("expected a scalar, got shape {0}")]
    NotScalar(Shape),
    #[error("{len} values cannot fill shape {shape}")]
    DataLength { shape: Shape, len: usize },
    #[error("optimizer holds {expected} parameter slots, got {got}")]
    ParamCount { expected: usize, got: usize },
}

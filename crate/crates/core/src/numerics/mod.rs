//! Dense `f64` tensors, a reverse-mode tape, named parameters, Adam and
//! JSON checkpoints.

mod adam;
mod checkpoint;
mod gaussian;
pub mod gradcheck;
mod params;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, StoredTensor, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gaussian::kernel;
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use tape::{sigmoid, softplus, Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("duplicate parameter name {0:?}")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[cfg(test)]
mod tests;

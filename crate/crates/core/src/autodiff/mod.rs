//! Dense matrix autodiff: values, the recording tape, named parameter
//! stores, finite-difference gradient checks and the checkpoint format.

mod checkpoint;
mod gradcheck;
mod matrix;
mod params;
mod tape;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, TensorEntry, MANIFEST_FILE, PARAMS_FILE,
};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use matrix::Matrix;
pub use params::{BoundParams, ParamId, ParamStore};
pub use tape::{Axis, Gradients, Mask, Tape, Tensor};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: [usize; 2],
        rhs: [usize; 2],
    },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("loss must be a 1x1 tensor, got {shape:?}")]
    NonScalarLoss { shape: [usize; 2] },
    #[error("tensor belongs to a different tape")]
    DetachedTape,
    #[error("{op} needs at least one input element")]
    EmptyInput { op: &'static str },
    #[error("row index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Result<T, E = AutodiffError> = std::result::Result<T, E>;

//! Deep multimodal brain network learning.
//!
//! Structural connectivity is encoded by two stacks of multi-stage graph
//! convolution kernels (MGCK); bilinear decoders predict the positive and
//! negative parts of functional connectivity, and a mean-pooled MLP head
//! classifies subjects. Node saliency comes from the head's channel weights.
//!
//! Everything is built on a small dense reverse-mode autodiff engine in
//! binary64 ([`autodiff`]).

pub mod autodiff;
pub mod error;
pub mod graph;
pub mod io;
pub mod layers;
pub mod losses;
pub mod saliency;
pub mod training;

pub use autodiff::{Matrix, ParamStore, Tape, Tensor};
pub use error::{Error, Result};
pub use graph::{BrainGraph, Dataset, Modality, SignSplit, SubjectRecord};
pub use layers::{DmbnModel, ModelConfig};
pub use losses::{LossBreakdown, LossWeights};
pub use saliency::SaliencyMap;
pub use training::{Metrics, TrainConfig, TrainReport};

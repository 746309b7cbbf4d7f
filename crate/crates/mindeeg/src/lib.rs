//! Multi-granularity EEG graph network with discrete codebooks.
//!
//! The model builds per-sample brain-network graphs at three granularities:
//! global (all 62 channels), intra-regional (7 channel groups) and
//! inter-regional (the 7 fused region nodes). It vector-quantizes each
//! adjacency through a learnable codebook, and classifies the concatenated
//! multi-granularity features. Everything runs on a small reverse-mode
//! autodiff core in plain `f64`.
//!
//! See the `examples/` directory for one runnable program per capability and
//! the `mindeeg` binary for the train/eval/analysis CLI.

pub mod codebook;
pub mod config;
pub mod data;
pub mod encoder;
pub mod gradcheck;
pub mod graph;
pub mod magcn;
pub mod metrics;
pub mod model;
pub mod regional;
pub mod splits;
pub mod tensor;
pub mod train;

pub use config::ModelConfig;
pub use data::{Dataset, EEGSample};
pub use model::MindEegModel;
pub use splits::SplitPlan;
pub use tensor::Tensor;

use thiserror::Error;

/// Error type for configuration, I/O and data-format failures.
///
/// Shape errors inside the differentiable core are programming errors and
/// panic with a message naming both shapes instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data format error: {0}")]
    Format(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("training aborted: {0}")]
    Training(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

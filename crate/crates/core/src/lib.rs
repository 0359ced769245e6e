//! # edbn
//!
//! An embedding-based dual-branch network for tabular return prediction,
//! implemented from scratch: matrices, forward and backward passes, Adam
//! with warm-up, staged training and Pearson evaluation.
//!
//! One branch encodes dense features with a perceptron; the other embeds the
//! categorical investment id and encodes the embedding with a smaller
//! perceptron. Their outputs are concatenated and fed to a shared head that
//! produces one regression output per row.
//!
//! ## Modules
//!
//! - [`tensor`]: row-major [`Matrix`] and deterministic kernels
//! - [`rng`]: seeded ChaCha8 random source
//! - [`layers`]: linear, swish, embedding, concatenation, MSE
//! - [`model`]: [`DualBranchNet`], parameter counting, model files
//! - [`optim`]: Adam and the warm-up schedule
//! - [`metrics`]: Pearson coefficient and MSE
//! - [`data`]: CSV ingestion, time split, batching, synthetic data
//! - [`trainer`]: pre-training, joint training, evaluation

pub mod data;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use data::{Dataset, SynthSpec, Vocab};
pub use error::{Error, ErrorKind, Result};
pub use metrics::{pearson, MetricReport};
pub use model::{DualBranchNet, ModelConfig};
pub use rng::RngState;
pub use tensor::{Matrix, Real};
pub use trainer::{train, TrainConfig, TrainReport};

//! Standard and double-weight neural networks trained from scratch, with the
//! seed-sweep protocol used to compare them.
//!
//! A double-weight dense layer computes `φ(x·(W∘Γ)ᵀ + b)`: every connection
//! carries the product of two independently learned weights.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod optim;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use data::{BatchIterator, Dataset, Split, ToyKind};
pub use error::{Error, Result};
pub use experiment::{
    evaluate_accuracy, run_comparison, summarize_run, AccuracyCurve, ComparisonConfig, ComparisonReport, SeedSummary,
};
pub use gradcheck::{gradient_check, CheckSetup, GradCheckReport, GRADCHECK_PARAM_LIMIT};
pub use layers::{Activation, ConvParams, DenseParams, Loss};
pub use network::{build_network, GammaInit, InitSpec, Layer, LayerSpec, Model, NetworkSpec, OptimizerSpec};
pub use optim::{adam_step, AdamState};
pub use rng::{derive_seed, draw_truncated_normal, Rng};
pub use stats::{welch_t_test, WelchResult};
pub use tensor::Tensor;
pub use train::{train, EvalConfig, IterationRecord, Trainer};

//! Layer forward/backward kernels, activations and losses.

pub mod activation;
pub mod conv;
pub mod dense;
pub mod loss;

pub use activation::Activation;
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvParams};
pub use dense::{dense_backward, dense_backward_preact, dense_forward, DenseGrads, DenseParams};
pub use loss::Loss;

use crate::tensor::Tensor;

/// What one layer's forward pass leaves behind for its backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCache {
    /// Layer input (flattened to `[batch × features]` for dense layers).
    pub input: Tensor,
    /// Pre-activation.
    pub z: Tensor,
    /// Activation `φ(z)`.
    pub a: Tensor,
}

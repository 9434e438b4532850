//! Fully connected layers, standard and double-weight.
//!
//! A double-weight layer carries a second weight matrix `gamma` of the same shape
//! as `w`. Its forward pass is a standard dense pass over the effective weights
//! `V = w ∘ gamma`:
//!
//! ```text
//! z = x · Vᵀ + b,   a = φ(z)
//! ```
//!
//! With `δ = ∂E/∂z` and `G = δᵀ · x`, the backward pass is
//!
//! ```text
//! ∂E/∂w = G ∘ gamma,   ∂E/∂gamma = G ∘ w,   ∂E/∂b = Σ_batch δ,   ∂E/∂x = δ · V
//! ```
//!
//! The bias is not double-weighted.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::activation::Activation;
use crate::layers::LayerCache;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    /// `[out × in]`
    pub w: Tensor,
    /// Second weight matrix, present iff the layer is double-weight.
    pub gamma: Option<Tensor>,
    /// `[out]`
    pub b: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub w: Tensor,
    pub gamma: Option<Tensor>,
    pub b: Tensor,
    /// Gradient w.r.t. the (flattened) layer input.
    pub input: Tensor,
}

impl DenseParams {
    pub fn new(w: Tensor, gamma: Option<Tensor>, b: Tensor) -> Result<Self> {
        let (out, _) = w.dims2()?;
        if let Some(g) = &gamma {
            if g.shape() != w.shape() {
                return Err(Error::dim("dense gamma", g.shape(), w.shape()));
            }
        }
        if b.shape() != [out] {
            return Err(Error::dim("dense bias", b.shape(), &[out]));
        }
        Ok(DenseParams { w, gamma, b })
    }

    pub fn in_features(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn is_double_weight(&self) -> bool {
        self.gamma.is_some()
    }

    /// `w ∘ gamma`, or `w` itself for a standard layer.
    pub fn effective_weights(&self) -> Result<Cow<'_, Tensor>> {
        match &self.gamma {
            Some(g) => Ok(Cow::Owned(self.w.hadamard(g)?)),
            None => Ok(Cow::Borrowed(&self.w)),
        }
    }
}

fn flatten_batch(x: &Tensor) -> Result<Tensor> {
    if x.rank() < 2 {
        return Err(Error::Argument(format!(
            "dense input needs a batch dimension, got shape {:?}",
            x.shape()
        )));
    }
    let (rows, cols) = x.rows_cols();
    x.reshape(&[rows, cols])
}

pub fn dense_forward(params: &DenseParams, x: &Tensor, act: Activation) -> Result<(Tensor, LayerCache)> {
    let input = flatten_batch(x)?;
    if input.shape()[1] != params.in_features() {
        return Err(Error::dim("dense forward", x.shape(), params.w.shape()));
    }
    let v = params.effective_weights()?;
    let z = input.matmul_nt(&v)?.add_row_broadcast(&params.b)?;
    let a = act.apply(&z);
    Ok((a.clone(), LayerCache { input, z, a }))
}

/// Backward pass given `∂E/∂a` (the gradient w.r.t. this layer's output).
pub fn dense_backward(
    params: &DenseParams,
    cache: &LayerCache,
    upstream: &Tensor,
    act: Activation,
) -> Result<DenseGrads> {
    let delta = act.backward(&cache.z, &cache.a, upstream)?;
    dense_backward_preact(params, cache, &delta)
}

/// Backward pass given `δ = ∂E/∂z` directly (used for the fused softmax/cross-entropy head).
pub fn dense_backward_preact(params: &DenseParams, cache: &LayerCache, delta: &Tensor) -> Result<DenseGrads> {
    if delta.shape() != cache.z.shape() {
        return Err(Error::dim("dense backward", delta.shape(), cache.z.shape()));
    }
    let g = delta.matmul_tn(&cache.input)?;
    let (w, gamma) = match &params.gamma {
        Some(gm) => (g.hadamard(gm)?, Some(g.hadamard(&params.w)?)),
        None => (g, None),
    };
    let b = delta.sum_rows()?;
    let input = delta.matmul(&*params.effective_weights()?)?;
    Ok(DenseGrads { w, gamma, b, input })
}

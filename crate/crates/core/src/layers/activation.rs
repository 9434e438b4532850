use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    /// Row-wise over the trailing dimension. Only valid on the output layer.
    Softmax,
    Linear,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(z: &Tensor) -> Tensor {
    let (_, cols) = z.rows_cols();
    let mut out = z.clone();
    for row in out.data_mut().chunks_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

impl Activation {
    pub fn apply(self, z: &Tensor) -> Tensor {
        match self {
            Activation::Sigmoid => z.map(sigmoid),
            Activation::Relu => z.map(|v| v.max(0.0)),
            Activation::Softmax => softmax_rows(z),
            Activation::Linear => z.clone(),
        }
    }

    /// Element-wise derivative φ′(z). Softmax has no element-wise derivative;
    /// use [`Activation::backward`] for it.
    pub fn derivative(self, z: &Tensor) -> Result<Tensor> {
        match self {
            Activation::Sigmoid => Ok(z.map(|v| {
                let s = sigmoid(v);
                s * (1.0 - s)
            })),
            // subgradient 0 at the kink
            Activation::Relu => Ok(z.map(|v| if v > 0.0 { 1.0 } else { 0.0 })),
            Activation::Linear => Ok(Tensor::ones(z.shape())),
            Activation::Softmax => Err(Error::Argument("softmax has no element-wise derivative".into())),
        }
    }

    /// Maps ∂E/∂a to ∂E/∂z, given the cached pre-activation `z` and activation `a`.
    pub fn backward(self, z: &Tensor, a: &Tensor, upstream: &Tensor) -> Result<Tensor> {
        match self {
            Activation::Softmax => {
                if upstream.shape() != a.shape() {
                    return Err(Error::dim("softmax backward", upstream.shape(), a.shape()));
                }
                let (_, cols) = a.rows_cols();
                let mut out = upstream.clone();
                for (g, s) in out.data_mut().chunks_mut(cols).zip(a.data().chunks(cols)) {
                    let dot: f64 = g.iter().zip(s).map(|(u, p)| u * p).sum();
                    for (gi, &si) in g.iter_mut().zip(s) {
                        *gi = si * (*gi - dot);
                    }
                }
                Ok(out)
            }
            Activation::Linear => {
                if upstream.shape() != z.shape() {
                    return Err(Error::dim("activation backward", upstream.shape(), z.shape()));
                }
                Ok(upstream.clone())
            }
            _ => upstream.hadamard(&self.derivative(z)?),
        }
    }
}

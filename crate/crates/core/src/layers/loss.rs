use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::activation::softmax_rows;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Softmax fused with log-loss. Takes logits; the gradient is w.r.t. the logits.
    CrossEntropy,
    /// `½ Σ (y − ŷ)²`. Takes the network output; the gradient is w.r.t. that output.
    Sse,
}

impl Loss {
    /// Batch-mean loss and its gradient. For [`Loss::CrossEntropy`] `output` holds
    /// logits and the gradient is `(softmax(z) − y) / batch`; for [`Loss::Sse`] it
    /// holds predictions and the gradient is `(ŷ − y) / batch`.
    pub fn loss_and_grad(self, output: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
        if output.shape() != target.shape() {
            return Err(Error::dim("loss", output.shape(), target.shape()));
        }
        let (batch, cols) = output.rows_cols();
        let inv = 1.0 / batch as f64;
        match self {
            Loss::Sse => {
                let diff = output.sub(target)?;
                let e = 0.5 * diff.data().iter().map(|d| d * d).sum::<f64>() * inv;
                Ok((e, diff.scale(inv)))
            }
            Loss::CrossEntropy => {
                let mut e = 0.0;
                for (z, y) in output.data().chunks(cols).zip(target.data().chunks(cols)) {
                    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    e += z.iter().zip(y).map(|(zi, yi)| yi * (lse - zi)).sum::<f64>();
                }
                let grad = softmax_rows(output).sub(target)?.scale(inv);
                Ok((e * inv, grad))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> Tensor {
        Tensor::new(vec![1, v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn sse_zero_at_target() {
        let y = row(&[0.2, -1.0, 3.0]);
        let (e, g) = Loss::Sse.loss_and_grad(&y, &y).unwrap();
        assert_eq!(e, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sse_half_sum_of_squares() {
        let (e, g) = Loss::Sse.loss_and_grad(&row(&[1.0, 0.0]), &row(&[0.0, 1.0])).unwrap();
        assert_eq!(e, 1.0);
        assert_eq!(g.data(), &[1.0, -1.0]);
    }

    #[test]
    fn cross_entropy_two_class_uniform() {
        let (e, g) = Loss::CrossEntropy
            .loss_and_grad(&row(&[0.0, 0.0]), &row(&[1.0, 0.0]))
            .unwrap();
        assert!((e - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g.data(), &[-0.5, 0.5]);
    }

    #[test]
    fn batch_mean() {
        let out = Tensor::from_rows(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let y = Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let (e, g) = Loss::CrossEntropy.loss_and_grad(&out, &y).unwrap();
        assert!((e - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g.data(), &[-0.25, 0.25, 0.25, -0.25]);
    }

    #[test]
    fn shape_mismatch() {
        assert!(Loss::Sse.loss_and_grad(&row(&[1.0]), &row(&[1.0, 2.0])).is_err());
    }
}

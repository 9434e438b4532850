//! Small synthetic 2-D classification sets used as test fixtures.
//!
//! Points are stored as `[n, 1, 1, 2]` images with coordinates in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyKind {
    /// Two blobs on either side of `x + y = 1`, at least 0.1 away from it.
    TwoGaussians,
    /// Four blobs at the corners of a square, diagonal pairs sharing a label.
    Xor,
}

const TWO_GAUSSIAN_CENTERS: [([f64; 2], usize); 2] = [([0.3, 0.3], 0), ([0.7, 0.7], 1)];
const XOR_CENTERS: [([f64; 2], usize); 4] = [
    ([0.25, 0.25], 0),
    ([0.75, 0.75], 0),
    ([0.25, 0.75], 1),
    ([0.75, 0.25], 1),
];

fn draw_point(rng: &mut Rng, center: [f64; 2], sigma: f64, accept: impl Fn([f64; 2]) -> bool) -> [f64; 2] {
    loop {
        let p = [rng.normal(center[0], sigma), rng.normal(center[1], sigma)];
        if p.iter().all(|v| (0.0..=1.0).contains(v)) && accept(p) {
            return p;
        }
    }
}

/// Deterministic labelled toy data; item `i` comes from cluster `i mod k`.
pub fn make_toy_dataset(rng: &mut Rng, n: usize, kind: ToyKind) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::Argument(format!("toy dataset needs at least 4 items, got {n}")));
    }
    let mut coords = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (p, label) = match kind {
            ToyKind::TwoGaussians => {
                let (c, label) = TWO_GAUSSIAN_CENTERS[i % 2];
                let p = draw_point(rng, c, 0.1, |p| {
                    let s = p[0] + p[1] - 1.0;
                    if label == 0 {
                        s <= -0.1
                    } else {
                        s >= 0.1
                    }
                });
                (p, label)
            }
            ToyKind::Xor => {
                let (c, label) = XOR_CENTERS[i % 4];
                let p = draw_point(rng, c, 0.06, |p| (p[0] - c[0]).hypot(p[1] - c[1]) < 0.15);
                (p, label)
            }
        };
        coords.extend(p);
        labels.push(label);
    }
    Dataset::new(Tensor::new(vec![n, 1, 1, 2], coords)?, labels, 2, Split::Train)
}

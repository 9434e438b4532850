//! Labelled image datasets: MNIST (IDX), CIFAR-10 (binary), synthetic toys, and
//! fixed-size minibatching.

pub mod batch;
pub mod cifar;
pub mod idx;
pub mod toy;

use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use batch::BatchIterator;
pub use cifar::load_cifar10;
pub use idx::load_idx;
pub use toy::{make_toy_dataset, ToyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Images `[n, H, W, c]` with pixels in `[0, 1]` and one class label per image.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, num_classes: usize, split: Split) -> Result<Self> {
        if images.rank() != 4 {
            return Err(Error::Argument(format!(
                "dataset images must be [n, H, W, c], got {:?}",
                images.shape()
            )));
        }
        if images.shape()[0] != labels.len() {
            return Err(Error::dim("dataset labels", images.shape(), &[labels.len()]));
        }
        if let Some(bad) = images.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Argument(format!("pixel value {bad} outside [0, 1]")));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Argument(format!("label {bad} outside 0..{num_classes}")));
        }
        Ok(Dataset {
            images,
            labels,
            num_classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    /// `[H, W, c]`
    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    /// The first `n` items (all of them if `n` exceeds the length).
    pub fn take(&self, n: usize) -> Result<Dataset> {
        let n = n.min(self.len());
        self.slice(0, n)
    }

    pub fn slice(&self, start: usize, end: usize) -> Result<Dataset> {
        if start >= end || end > self.len() {
            return Err(Error::Argument(format!(
                "slice {start}..{end} of a {}-item dataset",
                self.len()
            )));
        }
        let per: usize = self.image_shape().iter().product();
        let [h, w, c] = self.image_shape();
        let images = Tensor::new(
            vec![end - start, h, w, c],
            self.images.data()[start * per..end * per].to_vec(),
        )?;
        Ok(Dataset {
            images,
            labels: self.labels[start..end].to_vec(),
            num_classes: self.num_classes,
            split: self.split,
        })
    }

    /// Gathers `indices` into an image batch `[b, H, W, c]` and one-hot targets
    /// `[b, num_classes]`.
    pub fn gather(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        if indices.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        let per: usize = self.image_shape().iter().product();
        let [h, w, c] = self.image_shape();
        let mut px = Vec::with_capacity(indices.len() * per);
        let mut targets = vec![0.0; indices.len() * self.num_classes];
        for (row, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return Err(Error::Argument(format!(
                    "index {i} out of range for {} items",
                    self.len()
                )));
            }
            px.extend_from_slice(&self.images.data()[i * per..(i + 1) * per]);
            targets[row * self.num_classes + self.labels[i]] = 1.0;
        }
        Ok((
            Tensor::new(vec![indices.len(), h, w, c], px)?,
            Tensor::new(vec![indices.len(), self.num_classes], targets)?,
        ))
    }
}

/// One-hot encoding of `label` over `num_classes`.
pub fn one_hot(label: usize, num_classes: usize) -> Result<Tensor> {
    if label >= num_classes {
        return Err(Error::Argument(format!("label {label} outside 0..{num_classes}")));
    }
    let mut v = vec![0.0; num_classes];
    v[label] = 1.0;
    Tensor::new(vec![1, num_classes], v)
}

/// Reads a whole file, transparently gunzipping `*.gz`.
pub(crate) fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                reason: format!("gzip stream: {e}"),
            })?;
    } else {
        file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(bytes)
}

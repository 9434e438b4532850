use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{Rng, RngState};
use crate::tensor::Tensor;

/// Fixed-size minibatches over `n` items. Each epoch is a fresh uniform shuffle
/// of `0..n`; the short tail of an epoch is dropped.
#[derive(Debug, Clone)]
pub struct BatchIterator {
    n: usize,
    batch_size: usize,
    permutation: Vec<usize>,
    cursor: usize,
    rng: Rng,
}

impl BatchIterator {
    pub fn new(n: usize, batch_size: usize, rng: Rng) -> Result<Self> {
        if batch_size == 0 || batch_size > n {
            return Err(Error::Argument(format!(
                "batch size {batch_size} must be in 1..={n} (dataset size)"
            )));
        }
        Ok(BatchIterator {
            n,
            batch_size,
            permutation: Vec::new(),
            cursor: 0,
            rng,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn next_indices(&mut self) -> &[usize] {
        if self.permutation.is_empty() || self.cursor + self.batch_size > self.n {
            self.permutation = (0..self.n).collect();
            self.rng.shuffle(&mut self.permutation);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += self.batch_size;
        &self.permutation[start..self.cursor]
    }

    /// Next `(images, one_hot_labels)` batch from `data`.
    pub fn next_batch(&mut self, data: &Dataset) -> Result<(Tensor, Tensor)> {
        if data.len() != self.n {
            return Err(Error::Argument(format!(
                "iterator built for {} items, dataset has {}",
                self.n,
                data.len()
            )));
        }
        let idx = self.next_indices().to_vec();
        data.gather(&idx)
    }

    pub(crate) fn snapshot(&self) -> (Vec<usize>, usize, RngState) {
        (self.permutation.clone(), self.cursor, self.rng.state())
    }

    pub(crate) fn restore(
        n: usize,
        batch_size: usize,
        permutation: Vec<usize>,
        cursor: usize,
        rng: &RngState,
    ) -> Result<Self> {
        let mut it = Self::new(n, batch_size, Rng::from_state(rng))?;
        if !(permutation.is_empty() || permutation.len() == n) || cursor > n {
            return Err(Error::Checkpoint(
                "batch iterator state does not match the dataset".into(),
            ));
        }
        it.permutation = permutation;
        it.cursor = cursor;
        Ok(it)
    }
}

//! Dense row-major `f64` tensors.
//!
//! A [`Tensor`] owns a flat buffer and an immutable shape. The batch dimension
//! always comes first. Only the handful of kernels the layers need are provided:
//! three matrix-product variants, element-wise maps and the bias broadcast.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Argument(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::dim("tensor", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero extent in {shape:?}");
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for tests
    /// and small literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Tensor::new(vec![rows.len(), cols], data).expect("non-empty rows")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Returns a tensor with the same data under a new shape.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape.to_vec(), self.data.clone())
    }

    pub(crate) fn into_shape(self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape.to_vec(), self.data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// (rows, cols) of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            other => Err(Error::Argument(format!("expected a matrix, got shape {other:?}"))),
        }
    }

    /// Leading extent and the product of the remaining extents.
    pub(crate) fn rows_cols(&self) -> (usize, usize) {
        let rows = self.shape[0];
        (rows, self.data.len() / rows)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::dim(op, &self.shape, &other.shape));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Element-wise (Hadamard) product.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, "hadamard", |a, b| a * b)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// `self · other` for `[m×k] · [k×n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2()?;
        let (k2, n) = other.dims2()?;
        if k != k2 {
            return Err(Error::dim("matmul", &self.shape, &other.shape));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Tensor::new(vec![m, n], out)
    }

    /// `self · otherᵀ` for `[m×k] · [n×k]ᵀ`.
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2()?;
        let (n, k2) = other.dims2()?;
        if k != k2 {
            return Err(Error::dim("matmul_nt", &self.shape, &other.shape));
        }
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b = &other.data[j * k..(j + 1) * k];
                out.push(a.iter().zip(b).map(|(x, y)| x * y).sum());
            }
        }
        Tensor::new(vec![m, n], out)
    }

    /// `selfᵀ · other` for `[k×m]ᵀ · [k×n]`.
    pub fn matmul_tn(&self, other: &Tensor) -> Result<Tensor> {
        let (k, m) = self.dims2()?;
        let (k2, n) = other.dims2()?;
        if k != k2 {
            return Err(Error::dim("matmul_tn", &self.shape, &other.shape));
        }
        let mut out = vec![0.0; m * n];
        for p in 0..k {
            let a_row = &self.data[p * m..(p + 1) * m];
            let b_row = &other.data[p * n..(p + 1) * n];
            for (i, &a) in a_row.iter().enumerate() {
                let row = &mut out[i * n..(i + 1) * n];
                for (o, &b) in row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Tensor::new(vec![m, n], out)
    }

    /// Adds `bias` (length = trailing extent) to every row.
    pub fn add_row_broadcast(&self, bias: &Tensor) -> Result<Tensor> {
        let (_, cols) = self.rows_cols();
        if bias.len() != cols || self.rank() < 2 {
            return Err(Error::dim("bias add", &self.shape, &bias.shape));
        }
        let mut out = self.clone();
        for row in out.data.chunks_mut(cols) {
            for (o, &b) in row.iter_mut().zip(&bias.data) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Column sums of a matrix (sum over the batch dimension).
    pub fn sum_rows(&self) -> Result<Tensor> {
        let (_, cols) = self.dims2()?;
        let mut out = vec![0.0; cols];
        for row in self.data.chunks(cols) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        Tensor::new(vec![cols], out)
    }

    /// Row `i` of a matrix-like tensor (leading dimension).
    pub fn row(&self, i: usize) -> &[f64] {
        let (_, cols) = self.rows_cols();
        &self.data[i * cols..(i + 1) * cols]
    }

    /// Per-row argmax of a `[batch×n]` tensor.
    pub fn argmax_rows(&self) -> Vec<usize> {
        let (rows, _) = self.rows_cols();
        (0..rows)
            .map(|i| argmax(self.row(i)).expect("rows are non-empty"))
            .collect()
    }
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::Argument("argmax of an empty row".into()));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Argmax of a single-row tensor (`[n]` or `[1×n]`).
pub fn argmax_row(t: &Tensor) -> Result<usize> {
    match t.shape() {
        [_] | [1, _] => argmax(t.data()),
        other => Err(Error::Argument(format!("argmax_row expects one row, got {other:?}"))),
    }
}

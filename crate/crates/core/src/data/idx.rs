//! MNIST IDX files.
//!
//! Images: big-endian `u32` magic `0x00000803` (2051), count, rows, cols, then
//! `count·rows·cols` unsigned bytes. Labels: magic `0x00000801` (2049), count, then
//! `count` bytes. Files ending in `.gz` are gunzipped first.

use std::path::Path;

use crate::data::{read_maybe_gz, Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;
const MNIST_CLASSES: usize = 10;

fn format_err(path: &Path, offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

/// Parsed image file: `(count, rows, cols, pixels)`.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    if bytes.len() < 16 {
        return Err(format_err(path, bytes.len(), "truncated image header (need 16 bytes)"));
    }
    let magic = be_u32(bytes, 0);
    if magic != IMAGES_MAGIC {
        return Err(format_err(
            path,
            0,
            format!("bad magic {magic}, expected {IMAGES_MAGIC} for an image file"),
        ));
    }
    let n = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8) as usize;
    let cols = be_u32(bytes, 12) as usize;
    for (off, v, what) in [(4, n, "image count"), (8, rows, "rows"), (12, cols, "cols")] {
        if v == 0 {
            return Err(format_err(path, off, format!("{what} is zero")));
        }
    }
    let expected = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .and_then(|v| v.checked_add(16))
        .ok_or_else(|| format_err(path, 4, "header dimensions overflow"))?;
    if bytes.len() < expected {
        return Err(format_err(
            path,
            bytes.len(),
            format!(
                "truncated pixel data: header promises {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(path, expected, "trailing bytes after the last image"));
    }
    Ok((n, rows, cols, bytes[16..].to_vec()))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    if bytes.len() < 8 {
        return Err(format_err(path, bytes.len(), "truncated label header (need 8 bytes)"));
    }
    let magic = be_u32(bytes, 0);
    if magic != LABELS_MAGIC {
        return Err(format_err(
            path,
            0,
            format!("bad magic {magic}, expected {LABELS_MAGIC} for a label file"),
        ));
    }
    let n = be_u32(bytes, 4) as usize;
    let expected = 8 + n;
    if bytes.len() < expected {
        return Err(format_err(
            path,
            bytes.len(),
            format!("truncated labels: header promises {n}, file holds {}", bytes.len() - 8),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(path, expected, "trailing bytes after the last label"));
    }
    bytes[8..]
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if (l as usize) < MNIST_CLASSES {
                Ok(l as usize)
            } else {
                Err(format_err(path, 8 + i, format!("label {l} is not a digit")))
            }
        })
        .collect()
}

/// Loads an MNIST image/label file pair into `[n, rows, cols, 1]` images scaled by 1/255.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let (n, rows, cols, pixels) = parse_images(&read_maybe_gz(images_path)?, images_path)?;
    let labels = parse_labels(&read_maybe_gz(labels_path)?, labels_path)?;
    if labels.len() != n {
        return Err(format_err(
            labels_path,
            4,
            format!("{} labels for {n} images in {}", labels.len(), images_path.display()),
        ));
    }
    let images = Tensor::new(
        vec![n, rows, cols, 1],
        pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    )?;
    Dataset::new(images, labels, MNIST_CLASSES, split)
}

/// Loads `train-*` or `t10k-*` files from an MNIST directory, accepting raw or `.gz`.
pub fn load_mnist_dir(dir: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let dir = dir.as_ref();
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let pick = |stem: String| {
        let raw = dir.join(&stem);
        if raw.exists() {
            raw
        } else {
            dir.join(format!("{stem}.gz"))
        }
    };
    load_idx(
        pick(format!("{prefix}-images-idx3-ubyte")),
        pick(format!("{prefix}-labels-idx1-ubyte")),
        split,
    )
}

pub fn encode_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

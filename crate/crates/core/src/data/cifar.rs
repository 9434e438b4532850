//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by a
//! 32×32 image stored channel-planar (1024 R, 1024 G, 1024 B, each row-major).

use std::path::Path;

use crate::data::{read_maybe_gz, Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const RECORD_BYTES: usize = 3073;
const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;
const CLASSES: usize = 10;

/// Appends the records in `bytes` as `[32, 32, 3]` images.
fn parse_records(bytes: &[u8], path: &Path, pixels: &mut Vec<f64>, labels: &mut Vec<usize>) -> Result<()> {
    if bytes.is_empty() || bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: (bytes.len() - bytes.len() % RECORD_BYTES) as u64,
            reason: format!(
                "length {} is not a positive multiple of the {RECORD_BYTES}-byte record size",
                bytes.len()
            ),
        });
    }
    for (r, record) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let label = record[0] as usize;
        if label >= CLASSES {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: (r * RECORD_BYTES) as u64,
                reason: format!("label {label} in record {r} is not in 0..{CLASSES}"),
            });
        }
        labels.push(label);
        let planes = &record[1..];
        for i in 0..PLANE {
            for c in 0..3 {
                pixels.push(f64::from(planes[c * PLANE + i]) / 255.0);
            }
        }
    }
    Ok(())
}

/// Concatenates one or more batch files into a dataset of `[n, 32, 32, 3]` images.
pub fn load_cifar10<P: AsRef<Path>>(batch_paths: &[P], split: Split) -> Result<Dataset> {
    if batch_paths.is_empty() {
        return Err(Error::Argument("no CIFAR-10 batch files given".into()));
    }
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in batch_paths {
        let path = path.as_ref();
        parse_records(&read_maybe_gz(path)?, path, &mut pixels, &mut labels)?;
    }
    let images = Tensor::new(vec![labels.len(), SIDE, SIDE, 3], pixels)?;
    Dataset::new(images, labels, CLASSES, split)
}

/// Loads `data_batch_{1..5}.bin` or `test_batch.bin` from a CIFAR-10 binary directory.
pub fn load_cifar10_dir(dir: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let dir = dir.as_ref();
    let files: Vec<_> = match split {
        Split::Train => (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect(),
        Split::Test => vec![dir.join("test_batch.bin")],
    };
    load_cifar10(&files, split)
}

/// Encodes one record from an HWC byte image (inverse of the loader's layout).
pub fn encode_record(label: u8, hwc: &[u8]) -> Vec<u8> {
    assert_eq!(hwc.len(), PLANE * 3, "expected a 32x32x3 image");
    let mut out = Vec::with_capacity(RECORD_BYTES);
    out.push(label);
    for c in 0..3 {
        out.extend((0..PLANE).map(|i| hwc[i * 3 + c]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_bytes(bytes: &[u8]) -> Result<Dataset> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.bin");
        std::fs::write(&path, bytes).unwrap();
        load_cifar10(&[path], Split::Train)
    }

    #[test]
    fn all_white_record() {
        let mut rec = vec![3u8];
        rec.extend([255u8; 3072]);
        let d = load_bytes(&rec).unwrap();
        assert_eq!(d.labels(), &[3]);
        assert_eq!(d.images().shape(), &[1, 32, 32, 3]);
        assert!(d.images().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn planar_to_interleaved() {
        let hwc: Vec<u8> = (0..3072).map(|i| (i % 251) as u8).collect();
        let d = load_bytes(&encode_record(9, &hwc)).unwrap();
        let back: Vec<u8> = d.images().data().iter().map(|v| (v * 255.0).round() as u8).collect();
        assert_eq!(back, hwc);
        // red plane leads the record
        let rec = encode_record(0, &hwc);
        assert_eq!(rec[1], hwc[0]);
        assert_eq!(rec[1 + PLANE], hwc[1]);
    }

    #[test]
    fn record_arithmetic_enforced() {
        assert!(matches!(load_bytes(&[0u8; 3074]), Err(Error::Format { .. })));
        assert!(matches!(load_bytes(&[]), Err(Error::Format { .. })));
        let mut rec = vec![10u8];
        rec.extend([0u8; 3072]);
        assert!(matches!(load_bytes(&rec), Err(Error::Format { .. })));
    }
}

//! Binary checkpoints of a training run.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "DWNETCKP"
//! version  u32
//! count    u32      number of sections
//! section  name_len u32, name (UTF-8), kind u8, payload
//!   kind 0  f64 tensor: rank u32, rank × u64 extents, f64 data
//!   kind 1  u64 array:  len u64, len × u64
//!   kind 2  JSON:       len u64, bytes
//! ```
//!
//! A checkpoint holds the spec, every parameter tensor, the Adam moments and step,
//! the iteration counter, and the batch iterator (permutation, cursor, rng state),
//! which is everything a resumed run needs to continue bit-for-bit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::BatchIterator;
use crate::error::{Error, Result};
use crate::network::{build_network, NetworkSpec};
use crate::optim::AdamState;
use crate::rng::RngState;
use crate::tensor::Tensor;
use crate::train::Trainer;

pub const MAGIC: &[u8; 8] = b"DWNETCKP";
pub const VERSION: u32 = 1;

const KIND_TENSOR: u8 = 0;
const KIND_U64: u8 = 1;
const KIND_JSON: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Tensor(Tensor),
    U64(Vec<u64>),
    Json(Vec<u8>),
}

/// Named sections in a fixed (sorted) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    sections: BTreeMap<String, Section>,
}

fn rng_words(s: &RngState) -> Vec<u64> {
    let mut words: Vec<u64> = s
        .key
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    words.push(s.stream);
    words.push(s.word_pos as u64);
    words.push((s.word_pos >> 64) as u64);
    words
}

fn rng_from_words(w: &[u64]) -> Result<RngState> {
    if w.len() != 7 {
        return Err(Error::Checkpoint(format!("rng state needs 7 words, found {}", w.len())));
    }
    let mut key = [0u8; 32];
    for (i, word) in w[..4].iter().enumerate() {
        key[i * 8..(i + 1) * 8].copy_from_slice(&word.to_le_bytes());
    }
    Ok(RngState {
        key,
        stream: w[4],
        word_pos: u128::from(w[5]) | (u128::from(w[6]) << 64),
    })
}

impl Checkpoint {
    pub(crate) fn capture(t: &Trainer) -> Self {
        let mut s = BTreeMap::new();
        let spec = serde_json::to_vec(&t.spec).expect("spec serializes");
        s.insert("spec".into(), Section::Json(spec));
        s.insert("iteration".into(), Section::U64(vec![t.iteration]));
        s.insert("train_len".into(), Section::U64(vec![t.train_len as u64]));
        let (perm, cursor, rng) = t.batches.snapshot();
        s.insert(
            "batch.permutation".into(),
            Section::U64(perm.iter().map(|&i| i as u64).collect()),
        );
        s.insert("batch.cursor".into(), Section::U64(vec![cursor as u64]));
        s.insert("batch.rng".into(), Section::U64(rng_words(&rng)));
        let params = t.model.parameters();
        for (name, tensor) in &params {
            s.insert(format!("param.{name}"), Section::Tensor((*tensor).clone()));
        }
        if let Some(adam) = t.optimizer.adam_state() {
            s.insert("adam.t".into(), Section::U64(vec![adam.t]));
            for ((name, _), (m, v)) in params.iter().zip(adam.m.iter().zip(&adam.v)) {
                s.insert(format!("adam.m.{name}"), Section::Tensor(m.clone()));
                s.insert(format!("adam.v.{name}"), Section::Tensor(v.clone()));
            }
        }
        Checkpoint { sections: s }
    }

    pub fn sections(&self) -> &BTreeMap<String, Section> {
        &self.sections
    }

    fn tensor(&self, name: &str) -> Result<&Tensor> {
        match self.sections.get(name) {
            Some(Section::Tensor(t)) => Ok(t),
            _ => Err(Error::Checkpoint(format!("missing tensor section {name:?}"))),
        }
    }

    fn words(&self, name: &str) -> Result<&[u64]> {
        match self.sections.get(name) {
            Some(Section::U64(v)) => Ok(v),
            _ => Err(Error::Checkpoint(format!("missing u64 section {name:?}"))),
        }
    }

    fn scalar(&self, name: &str) -> Result<u64> {
        match self.words(name)? {
            [v] => Ok(*v),
            other => Err(Error::Checkpoint(format!(
                "section {name:?} has {} values, expected 1",
                other.len()
            ))),
        }
    }

    pub fn spec(&self) -> Result<NetworkSpec> {
        match self.sections.get("spec") {
            Some(Section::Json(bytes)) => serde_json::from_slice(bytes)
                .map_err(|e| Error::Checkpoint(format!("spec section does not parse: {e}"))),
            _ => Err(Error::Checkpoint("missing spec section".into())),
        }
    }

    pub fn iteration(&self) -> Result<u64> {
        self.scalar("iteration")
    }

    pub(crate) fn restore(&self) -> Result<Trainer> {
        let spec = self.spec()?;
        let mut model = build_network(&spec)?;
        let names: Vec<String> = model.parameters().into_iter().map(|(n, _)| n).collect();
        for (name, p) in names.iter().zip(model.parameters_mut()) {
            let saved = self.tensor(&format!("param.{name}"))?;
            if saved.shape() != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, spec expects {:?}",
                    saved.shape(),
                    p.shape()
                )));
            }
            *p = saved.clone();
        }
        let n = self.scalar("train_len")? as usize;
        let perm = self.words("batch.permutation")?.iter().map(|&i| i as usize).collect();
        let batches = BatchIterator::restore(
            n,
            spec.batch_size,
            perm,
            self.scalar("batch.cursor")? as usize,
            &rng_from_words(self.words("batch.rng")?)?,
        )?;
        let iteration = self.iteration()?;
        let mut trainer = Trainer::assemble(spec, model, batches, iteration, n);
        if let Some(adam) = trainer.optimizer.adam_state_mut() {
            let mut m = Vec::with_capacity(names.len());
            let mut v = Vec::with_capacity(names.len());
            for name in &names {
                m.push(self.tensor(&format!("adam.m.{name}"))?.clone());
                v.push(self.tensor(&format!("adam.v.{name}"))?.clone());
            }
            *adam = AdamState {
                m,
                v,
                t: self.scalar("adam.t")?,
            };
        }
        Ok(trainer)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, section) in &self.sections {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match section {
                Section::Tensor(t) => {
                    out.push(KIND_TENSOR);
                    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
                    for &d in t.shape() {
                        out.extend_from_slice(&(d as u64).to_le_bytes());
                    }
                    for &x in t.data() {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                Section::U64(v) => {
                    out.push(KIND_U64);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    for &x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                Section::Json(b) => {
                    out.push(KIND_JSON);
                    out.extend_from_slice(&(b.len() as u64).to_le_bytes());
                    out.extend_from_slice(b);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(8)? != MAGIC {
            return Err(r.error_at(0, "not a dwnet checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.error_at(8, &format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32()?;
        let mut sections = BTreeMap::new();
        for _ in 0..count {
            let at = r.pos;
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.error_at(at, "section name is not UTF-8"))?
                .to_string();
            let kind_at = r.pos;
            let section = match r.take(1)?[0] {
                KIND_TENSOR => {
                    let rank = r.u32()? as usize;
                    let shape = (0..rank)
                        .map(|_| r.u64().map(|d| d as usize))
                        .collect::<Result<Vec<_>>>()?;
                    let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
                    let n = n
                        .filter(|&n| n <= r.remaining() / 8)
                        .ok_or_else(|| r.error_at(r.pos, "tensor data truncated"))?;
                    let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                    Section::Tensor(Tensor::new(shape, data).map_err(|e| r.error_at(kind_at, &e.to_string()))?)
                }
                KIND_U64 => {
                    let n = r.u64()? as usize;
                    if n > r.remaining() / 8 {
                        return Err(r.error_at(r.pos, "array truncated"));
                    }
                    Section::U64((0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?)
                }
                KIND_JSON => {
                    let n = r.u64()? as usize;
                    Section::Json(r.take(n)?.to_vec())
                }
                k => return Err(r.error_at(kind_at, &format!("unknown section kind {k}"))),
            };
            if sections.insert(name.clone(), section).is_some() {
                return Err(r.error_at(at, &format!("duplicate section {name:?}")));
            }
        }
        if r.remaining() != 0 {
            return Err(r.error_at(r.pos, "trailing bytes after the last section"));
        }
        Ok(Checkpoint { sections })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn error_at(&self, offset: usize, reason: &str) -> Error {
        Error::Format {
            path: PathBuf::from(self.path),
            offset: offset as u64,
            reason: reason.to_string(),
        }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(self.error_at(self.bytes.len(), "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

//! Binary container shared by model and tensor files:
//! `magic (4 bytes) | version u32 LE | manifest_len u64 LE | JSON manifest | payload`.
//!
//! Payload arrays are little-endian and addressed by byte offsets relative
//! to the start of the payload.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER_LEN: usize = 16;

pub fn encode(magic: &[u8; 4], version: u32, manifest: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + manifest.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest);
    out.extend_from_slice(payload);
    out
}

/// Split a container into `(version, manifest, payload)` after checking the magic.
pub fn decode<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<(u32, &'a [u8], &'a [u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("file shorter than the container header".into()));
    }
    if &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let end = usize::try_from(len)
        .ok()
        .and_then(|l| HEADER_LEN.checked_add(l))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Format("manifest length exceeds file size".into()))?;
    Ok((version, &bytes[HEADER_LEN..end], &bytes[end..]))
}

pub(crate) fn f64s_to_bytes(values: &[f64], out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Read `count` f64 values at `offset` of `payload`.
pub(crate) fn read_f64s(payload: &[u8], offset: usize, count: usize) -> Result<Vec<f64>> {
    let bytes = slice(payload, offset, count.checked_mul(8))?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

fn slice(payload: &[u8], offset: usize, len: Option<usize>) -> Result<&[u8]> {
    len.and_then(|l| offset.checked_add(l))
        .filter(|&end| end <= payload.len())
        .map(|end| &payload[offset..end])
        .ok_or_else(|| Error::Format(format!("array at offset {offset} runs past the payload")))
}

const TENSOR_MAGIC: &[u8; 4] = b"TPK0";
const TENSOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F64(Vec<f64>),
    I64(Vec<i64>),
    I8(Vec<i8>),
}

impl TensorData {
    fn len(&self) -> usize {
        match self {
            TensorData::F64(v) => v.len(),
            TensorData::I64(v) => v.len(),
            TensorData::I8(v) => v.len(),
        }
    }

    fn dtype(&self) -> &'static str {
        match self {
            TensorData::F64(_) => "f64le",
            TensorData::I64(_) => "i64le",
            TensorData::I8(_) => "i8",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn f64(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::new(name.into(), shape, TensorData::F64(data))
    }

    pub fn i64(name: impl Into<String>, shape: Vec<usize>, data: Vec<i64>) -> Result<Self> {
        Self::new(name.into(), shape, TensorData::I64(data))
    }

    pub fn i8(name: impl Into<String>, shape: Vec<usize>, data: Vec<i8>) -> Result<Self> {
        Self::new(name.into(), shape, TensorData::I8(data))
    }

    fn new(name: String, shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::dim("Tensor shape", count, data.len()));
        }
        Ok(Self { name, shape, data })
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            TensorData::F64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<&[i64]> {
        match &self.data {
            TensorData::I64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i8(&self) -> Option<&[i8]> {
        match &self.data {
            TensorData::I8(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: usize,
    nbytes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorManifest {
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    meta: BTreeMap<String, serde_json::Value>,
}

/// Named tensors with free-form metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorPack {
    tensors: Vec<Tensor>,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl TensorPack {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor; names must be unique.
    pub fn push(&mut self, t: Tensor) -> Result<()> {
        if self.get(&t.name).is_some() {
            return Err(Error::invalid(format!("duplicate tensor name `{}`", t.name)));
        }
        self.tensors.push(t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        let mut entries = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            let offset = payload.len();
            match &t.data {
                TensorData::F64(v) => f64s_to_bytes(v, &mut payload),
                TensorData::I64(v) => v.iter().for_each(|x| payload.extend_from_slice(&x.to_le_bytes())),
                TensorData::I8(v) => v.iter().for_each(|x| payload.extend_from_slice(&x.to_le_bytes())),
            }
            entries.push(TensorEntry {
                name: t.name.clone(),
                dtype: t.data.dtype().into(),
                shape: t.shape.clone(),
                offset,
                nbytes: payload.len() - offset,
            });
        }
        let manifest = serde_json::to_vec(&TensorManifest { tensors: entries, meta: self.meta.clone() })?;
        Ok(encode(TENSOR_MAGIC, TENSOR_VERSION, &manifest, &payload))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (version, manifest, payload) = decode(bytes, TENSOR_MAGIC)?;
        if version != TENSOR_VERSION {
            return Err(Error::Format(format!("unsupported TensorPack version {version}")));
        }
        let manifest: TensorManifest = serde_json::from_slice(manifest)?;
        let mut spans: Vec<(usize, usize)> = Vec::new();
        let mut pack = TensorPack { tensors: Vec::new(), meta: manifest.meta };
        for e in manifest.tensors {
            let count: usize = e.shape.iter().product();
            let width = match e.dtype.as_str() {
                "f64le" | "i64le" => 8,
                "i8" => 1,
                other => return Err(Error::Format(format!("unknown dtype `{other}`"))),
            };
            if count * width != e.nbytes {
                return Err(Error::Format(format!("tensor `{}`: nbytes does not match shape", e.name)));
            }
            let bytes = slice(payload, e.offset, Some(e.nbytes))?;
            spans.push((e.offset, e.offset + e.nbytes));
            let data = match e.dtype.as_str() {
                "f64le" => TensorData::F64(read_f64s(payload, e.offset, count)?),
                "i64le" => TensorData::I64(
                    bytes.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes"))).collect(),
                ),
                _ => TensorData::I8(bytes.iter().map(|&b| b as i8).collect()),
            };
            pack.push(Tensor { name: e.name, shape: e.shape, data })?;
        }
        spans.sort_unstable();
        if spans.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::Format("tensor byte ranges overlap".into()));
        }
        Ok(pack)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorPack {
        let mut p = TensorPack::new();
        p.push(Tensor::f64("vals", vec![2, 2], vec![1.0, -2.5, 3.0, f64::MIN_POSITIVE]).unwrap()).unwrap();
        p.push(Tensor::i64("idx", vec![3], vec![0, -1, i64::MAX]).unwrap()).unwrap();
        p.push(Tensor::i8("mask", vec![3], vec![1, 0, 1]).unwrap()).unwrap();
        p.meta.insert("problem".into(), serde_json::json!("Diff"));
        p
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let p = sample();
        let bytes = p.to_bytes().unwrap();
        let q = TensorPack::from_bytes(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn truncation_and_bad_magic_rejected() {
        let bytes = sample().to_bytes().unwrap();
        assert!(TensorPack::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(TensorPack::from_bytes(&bytes[..10]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(TensorPack::from_bytes(&bad).is_err());
    }

    #[test]
    fn shape_mismatch_and_duplicates_rejected() {
        assert!(Tensor::f64("x", vec![3], vec![1.0]).is_err());
        let mut p = sample();
        assert!(p.push(Tensor::i8("mask", vec![1], vec![1]).unwrap()).is_err());
    }
}

//! `LRCK` checkpoint container.
//!
//! ```text
//! "LRCK" | u32 LE header length | UTF-8 JSON header | payload
//! ```
//!
//! The header lists every tensor as `{name, shape, dtype, offset, length}`,
//! with byte offsets relative to the payload start, plus a config echo and
//! the run seed. The payload is the concatenation of little-endian `f32`
//! blobs in header order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ClassifierParams, Conv1dParams, DenseParams, EncoderParams, HeadParams, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    seed: u64,
    config: Value,
    tensors: Vec<TensorEntry>,
}

/// Named tensors plus the configuration and seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor)>,
    pub config: Value,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new(config: Value, seed: u64) -> Self {
        Self {
            tensors: Vec::new(),
            config,
            seed,
        }
    }

    pub fn add(&mut self, prefix: &str, set: &dyn ParamSet) -> &mut Self {
        for (name, t) in set.named_tensors() {
            self.tensors.push((format!("{prefix}.{name}"), t.clone()));
        }
        self
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn has_component(&self, prefix: &str) -> bool {
        let p = format!("{prefix}.");
        self.tensors.iter().any(|(n, _)| n.starts_with(&p))
    }

    fn take(&self, name: &str, rank: usize) -> Result<Tensor> {
        let t = self
            .get(name)
            .ok_or_else(|| Error::corrupt("checkpoint", format!("missing tensor {name}")))?;
        if t.ndim() != rank {
            return Err(Error::corrupt("checkpoint", format!("{name} has rank {}, want {rank}", t.ndim())));
        }
        Ok(t.clone())
    }

    fn conv(&self, name: &str) -> Result<Conv1dParams> {
        Ok(Conv1dParams {
            weight: self.take(&format!("{name}.weight"), 3)?,
            bias: self.take(&format!("{name}.bias"), 1)?,
        })
    }

    fn dense(&self, name: &str) -> Result<DenseParams> {
        Ok(DenseParams {
            weight: self.take(&format!("{name}.weight"), 2)?,
            bias: self.take(&format!("{name}.bias"), 1)?,
        })
    }

    /// Dropout rate is read from `config.model.dropout`, defaulting to 0.1.
    pub fn encoder(&self) -> Result<EncoderParams> {
        let dropout_rate = self
            .config
            .pointer("/model/dropout")
            .and_then(Value::as_f64)
            .unwrap_or(super::DEFAULT_DROPOUT);
        Ok(EncoderParams {
            conv1: self.conv("encoder.conv1")?,
            conv2: self.conv("encoder.conv2")?,
            conv3: self.conv("encoder.conv3")?,
            dropout_rate,
        })
    }

    pub fn head(&self) -> Result<HeadParams> {
        Ok(HeadParams {
            dense1: self.dense("head.dense1")?,
            dense2: self.dense("head.dense2")?,
            dense3: self.dense("head.dense3")?,
        })
    }

    pub fn classifier(&self) -> Result<ClassifierParams> {
        Ok(ClassifierParams {
            dense1: self.dense("classifier.dense1")?,
            dense2: self.dense("classifier.dense2")?,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut offset = 0u64;
        for (name, t) in &self.tensors {
            let length = 4 * t.numel() as u64;
            entries.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                dtype: "f32".into(),
                offset,
                length,
            });
            offset += length;
        }
        let header = serde_json::to_vec(&Header {
            version: CHECKPOINT_VERSION,
            seed: self.seed,
            config: self.config.clone(),
            tensors: entries,
        })?;
        let mut out = Vec::with_capacity(8 + header.len() + offset as usize);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |msg: String| Error::corrupt("checkpoint", msg);
        if bytes.len() < 8 {
            return Err(corrupt(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(corrupt(format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4]))));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let payload_start = 8usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| corrupt(format!("header length {hlen} exceeds file")))?;
        let header: Header = serde_json::from_slice(&bytes[8..payload_start])
            .map_err(|e| corrupt(format!("header: {e}")))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(corrupt(format!("unsupported version {}", header.version)));
        }
        let payload = &bytes[payload_start..];

        let mut spans: Vec<(u64, u64, &str)> = Vec::new();
        let mut seen = BTreeMap::new();
        for e in &header.tensors {
            if e.dtype != "f32" {
                return Err(corrupt(format!("{}: unsupported dtype {}", e.name, e.dtype)));
            }
            if seen.insert(e.name.as_str(), ()).is_some() {
                return Err(corrupt(format!("duplicate tensor {}", e.name)));
            }
            let numel: u64 = e.shape.iter().map(|&d| d as u64).product();
            if e.shape.is_empty() || numel == 0 || e.length != 4 * numel {
                return Err(corrupt(format!("{}: length {} does not match shape {:?}", e.name, e.length, e.shape)));
            }
            let end = e.offset.checked_add(e.length).ok_or_else(|| corrupt("offset overflow".into()))?;
            if end > payload.len() as u64 {
                return Err(corrupt(format!(
                    "{}: bytes {}..{end} beyond payload of {} (truncated?)",
                    e.name,
                    e.offset,
                    payload.len()
                )));
            }
            spans.push((e.offset, end, &e.name));
        }
        spans.sort_unstable();
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(corrupt(format!("tensors {} and {} overlap", w[0].2, w[1].2)));
            }
        }
        let used = spans.last().map_or(0, |s| s.1);
        if used != payload.len() as u64 {
            return Err(corrupt(format!("payload has {} bytes, header accounts for {used}", payload.len())));
        }

        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in &header.tensors {
            let raw = &payload[e.offset as usize..(e.offset + e.length) as usize];
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push((e.name.clone(), Tensor::new(e.shape.clone(), data)?));
        }
        Ok(Self {
            tensors,
            config: header.config,
            seed: header.seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

//! `LRW1` dataset container.
//!
//! ```text
//! "LRW1" | u32 LE header length | UTF-8 JSON header | count records
//! record = label i32 LE | subject i32 LE | t0 i32 LE | left 3*T f32 LE | right 3*T f32 LE
//! ```
//!
//! Left and right windows are stored channel-major (`[3, T]` row order).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{WindowPair, WindowedDataset};
use crate::error::{Error, Result};
use crate::model::ACCEL_CHANNELS;
use crate::tensor::Tensor;

pub const DATASET_MAGIC: &[u8; 4] = b"LRW1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    count: usize,
    window_len: usize,
    sample_rate_hz: f64,
    class_names: Vec<String>,
    provenance: String,
}

/// Bytes per record for window length `t`.
pub fn record_size(t: usize) -> usize {
    12 + 2 * ACCEL_CHANNELS * t * 4
}

pub fn to_bytes(ds: &WindowedDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let header = serde_json::to_vec(&Header {
        count: ds.len(),
        window_len: ds.window_len,
        sample_rate_hz: ds.sample_rate_hz,
        class_names: ds.class_names.clone(),
        provenance: ds.provenance.clone(),
    })?;
    let mut out = Vec::with_capacity(8 + header.len() + ds.len() * record_size(ds.window_len));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for p in &ds.pairs {
        out.extend_from_slice(&p.label.to_le_bytes());
        out.extend_from_slice(&p.subject.to_le_bytes());
        out.extend_from_slice(&p.t0.to_le_bytes());
        for v in p.left.data().iter().chain(p.right.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<WindowedDataset> {
    let corrupt = |msg: String| Error::corrupt("dataset", msg);
    if bytes.len() < 8 {
        return Err(corrupt(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != DATASET_MAGIC {
        return Err(corrupt(format!(
            "bad magic {:?}, expected LRW1",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = 8usize
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt(format!("header length {hlen} exceeds file")))?;
    let header: Header =
        serde_json::from_slice(&bytes[8..body]).map_err(|e| corrupt(format!("header: {e}")))?;
    if header.window_len == 0 {
        return Err(corrupt("window length 0".into()));
    }
    let rec = record_size(header.window_len);
    let payload = &bytes[body..];
    if Some(payload.len()) != header.count.checked_mul(rec) {
        return Err(corrupt(format!(
            "payload has {} bytes, header promises {} records of {rec} bytes (truncated?)",
            payload.len(),
            header.count
        )));
    }
    let n = ACCEL_CHANNELS * header.window_len;
    let floats = |raw: &[u8]| -> Vec<f32> {
        raw.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect()
    };
    let int = |raw: &[u8]| i32::from_le_bytes(raw.try_into().expect("4 bytes"));
    let mut pairs = Vec::with_capacity(header.count);
    for r in payload.chunks_exact(rec) {
        pairs.push(WindowPair {
            label: int(&r[0..4]),
            subject: int(&r[4..8]),
            t0: int(&r[8..12]),
            left: Tensor::new([ACCEL_CHANNELS, header.window_len], floats(&r[12..12 + 4 * n]))?,
            right: Tensor::new([ACCEL_CHANNELS, header.window_len], floats(&r[12 + 4 * n..]))?,
        });
    }
    WindowedDataset::new(
        pairs,
        header.sample_rate_hz,
        header.window_len,
        header.class_names,
        header.provenance,
    )
    .map_err(|e| corrupt(e.to_string()))
}

pub fn write_canonical(ds: &WindowedDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(ds)?).map_err(|e| Error::io(path, e))
}

pub fn read_canonical(path: impl AsRef<Path>) -> Result<WindowedDataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dataset_has_header_only() {
        let ds = WindowedDataset::new(vec![], 30.0, 60, vec!["x".into()], "empty").unwrap();
        let bytes = to_bytes(&ds).unwrap();
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 8 + hlen);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let ds = WindowedDataset::new(
            vec![WindowPair {
                left: Tensor::full([3, 2], 1.0),
                right: Tensor::full([3, 2], 2.0),
                label: 0,
                subject: 3,
                t0: 9,
            }],
            30.0,
            2,
            vec!["x".into()],
            "",
        )
        .unwrap();
        let bytes = to_bytes(&ds).unwrap();
        let mut bad = bytes.clone();
        bad[3] = b'2';
        assert!(matches!(from_bytes(&bad), Err(Error::Corrupt { .. })));
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Corrupt { .. })));
        assert_eq!(from_bytes(&bytes).unwrap(), ds);
    }
}

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Start sample in the source stream.
    pub t0: usize,
    /// `[C, window_len]`
    pub data: Tensor,
}

/// Cut `[C, L]` into windows of `round(window_seconds * rate)` samples starting
/// every `round(step_seconds * rate)` samples. The trailing partial window
/// is dropped.
pub fn window_stream(
    stream: &Tensor,
    window_seconds: f64,
    step_seconds: f64,
    rate_hz: f64,
) -> Result<Vec<Window>> {
    let &[channels, len] = stream.shape() else {
        return Err(Error::shape("window_stream", "stream rank", 2, stream.ndim()));
    };
    let window_len = (window_seconds * rate_hz).round() as usize;
    let step_len = (step_seconds * rate_hz).round() as usize;
    if window_len == 0 || step_len == 0 {
        return Err(Error::param(
            "window_stream",
            format!("window {window_len} and step {step_len} samples must be positive"),
        ));
    }
    if len < window_len {
        return Err(Error::Data(format!(
            "stream of {len} samples is shorter than one {window_len}-sample window"
        )));
    }
    let count = (len - window_len) / step_len + 1;
    let x = stream.data();
    let windows = (0..count)
        .map(|w| {
            let t0 = w * step_len;
            let data = (0..channels)
                .flat_map(|c| x[c * len + t0..c * len + t0 + window_len].iter().copied())
                .collect();
            Window {
                t0,
                data: Tensor::new([channels, window_len], data).expect("window shape"),
            }
        })
        .collect();
    Ok(windows)
}

/// Majority label of a window's samples; ties go to the lowest id.
pub fn label_window(labels: &[i64]) -> Option<i64> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    // BTreeMap iterates ascending, and `>` keeps the first (lowest) maximum.
    let mut best: Option<(i64, usize)> = None;
    for (label, n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((label, n));
        }
    }
    best.map(|(l, _)| l)
}

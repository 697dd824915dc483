//! MM-Fit adapter: left/right smartwatch accelerometers of each workout.
//!
//! File names are configurable; `{id}` expands to the two-digit workout id.
//! Accelerometer tables may be `.npy` (2-D, C order) or comma/whitespace
//! separated text with columns `frame, timestamp, x, y, z` (indices
//! configurable). Label files list `start_frame, end_frame, reps, activity`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{label_window, window_stream, WindowPair, WindowedDataset};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmfitConfig {
    pub root: PathBuf,
    pub workouts: Vec<i32>,
    pub left_file: String,
    pub right_file: String,
    pub labels_file: String,
    pub frame_column: usize,
    pub time_column: usize,
    pub accel_columns: [usize; 3],
    /// Seconds per timestamp unit (MM-Fit stores milliseconds).
    pub time_unit_seconds: f64,
    pub sample_rate_hz: f64,
    pub window_seconds: f64,
    pub step_seconds: f64,
    pub label_start_column: usize,
    pub label_end_column: usize,
    pub label_name_column: usize,
    /// Class order; `null_class` labels samples outside every annotated set.
    pub class_names: Vec<String>,
    pub null_class: String,
}

impl Default for MmfitConfig {
    fn default() -> Self {
        Self {
            root: PathBuf::from("mm-fit"),
            workouts: (0..=20).collect(),
            left_file: "w{id}/w{id}_sw_l_acc.npy".into(),
            right_file: "w{id}/w{id}_sw_r_acc.npy".into(),
            labels_file: "w{id}/w{id}_labels.csv".into(),
            frame_column: 0,
            time_column: 1,
            accel_columns: [2, 3, 4],
            time_unit_seconds: 1e-3,
            sample_rate_hz: 100.0,
            window_seconds: 2.0,
            step_seconds: 1.0,
            label_start_column: 0,
            label_end_column: 1,
            label_name_column: 3,
            class_names: [
                "non_activity",
                "squats",
                "lunges",
                "bicep_curls",
                "situps",
                "pushups",
                "tricep_extensions",
                "dumbbell_rows",
                "jumping_jacks",
                "dumbbell_shoulder_press",
                "lateral_shoulder_raises",
            ]
            .map(String::from)
            .to_vec(),
            null_class: "non_activity".into(),
        }
    }
}

impl MmfitConfig {
    pub fn path_for(&self, pattern: &str, workout: i32) -> PathBuf {
        self.root.join(pattern.replace("{id}", &format!("{workout:02}")))
    }
}

/// Numeric table from `.npy` or delimited text. Text rows that do not parse
/// as numbers (headers) are skipped.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "npy") {
        return read_npy(path, &bytes);
    }
    let text = String::from_utf8_lossy(&bytes);
    let mut rows = Vec::new();
    for line in text.lines() {
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        if let Ok(row) = fields.iter().map(|f| f.parse::<f64>()).collect::<Result<Vec<_>, _>>() {
            rows.push(row);
        }
    }
    Ok(rows)
}

fn read_npy(path: &Path, bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let bad = |msg: String| Error::Adapter(format!("{}: {msg}", path.display()));
    let npy = npyz::NpyFile::new(bytes).map_err(|e| bad(e.to_string()))?;
    if npy.order() != npyz::Order::C {
        return Err(bad("Fortran-ordered arrays are not supported".into()));
    }
    let shape = npy.shape().to_vec();
    let cols = match shape[..] {
        [_, c] => c as usize,
        [_] => 1,
        _ => return Err(bad(format!("expected a 2-D array, got shape {shape:?}"))),
    };
    let npyz::DType::Plain(ts) = npy.dtype() else {
        return Err(bad("structured dtypes are not supported".into()));
    };
    let flat: Vec<f64> = match (ts.type_char(), ts.size_field()) {
        (npyz::TypeChar::Float, 8) => npy.into_vec::<f64>().map_err(|e| bad(e.to_string()))?,
        (npyz::TypeChar::Float, 4) => npy
            .into_vec::<f32>()
            .map_err(|e| bad(e.to_string()))?
            .into_iter()
            .map(f64::from)
            .collect(),
        (npyz::TypeChar::Int, 8) => npy
            .into_vec::<i64>()
            .map_err(|e| bad(e.to_string()))?
            .into_iter()
            .map(|v| v as f64)
            .collect(),
        (npyz::TypeChar::Int, 4) => npy
            .into_vec::<i32>()
            .map_err(|e| bad(e.to_string()))?
            .into_iter()
            .map(f64::from)
            .collect(),
        _ => return Err(bad(format!("unsupported dtype {ts}"))),
    };
    Ok(flat.chunks(cols).map(<[f64]>::to_vec).collect())
}

struct Stream {
    time: Vec<f64>,
    frame: Vec<f64>,
    xyz: Vec<[f64; 3]>,
}

fn load_stream(cfg: &MmfitConfig, path: &Path) -> Result<Stream> {
    let rows = read_table(path)?;
    let need = cfg.accel_columns.iter().chain([&cfg.frame_column, &cfg.time_column]).max().copied().unwrap_or(0);
    let mut s = Stream {
        time: Vec::with_capacity(rows.len()),
        frame: Vec::with_capacity(rows.len()),
        xyz: Vec::with_capacity(rows.len()),
    };
    for (i, r) in rows.iter().enumerate() {
        if r.len() <= need {
            return Err(Error::Adapter(format!(
                "{}: row {i} has {} columns, need {}",
                path.display(),
                r.len(),
                need + 1
            )));
        }
        s.time.push(r[cfg.time_column] * cfg.time_unit_seconds);
        s.frame.push(r[cfg.frame_column]);
        s.xyz.push(cfg.accel_columns.map(|c| r[c]));
    }
    if s.time.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Adapter(format!("{}: timestamps are not sorted", path.display())));
    }
    Ok(s)
}

/// Index of the sample nearest to each clock tick (streams sorted by time).
fn nearest_indices(times: &[f64], clock: &[f64]) -> Vec<usize> {
    let mut j = 0;
    clock
        .iter()
        .map(|&t| {
            while j + 1 < times.len() && (times[j + 1] - t).abs() <= (times[j] - t).abs() {
                j += 1;
            }
            j
        })
        .collect()
}

struct Interval {
    start: f64,
    end: f64,
    class: i64,
}

fn load_labels(cfg: &MmfitConfig, path: &Path) -> Result<Vec<Interval>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    let mut out = Vec::new();
    for line in text.lines() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let need = cfg.label_start_column.max(cfg.label_end_column).max(cfg.label_name_column);
        if f.len() <= need {
            continue;
        }
        let (Ok(start), Ok(end)) = (f[cfg.label_start_column].parse::<f64>(), f[cfg.label_end_column].parse::<f64>())
        else {
            continue;
        };
        let name = f[cfg.label_name_column];
        let class = cfg
            .class_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Adapter(format!("{}: unknown activity {name:?}", path.display())))?;
        out.push(Interval {
            start,
            end,
            class: class as i64,
        });
    }
    Ok(out)
}

/// Align, window and label one workout.
pub fn adapt_workout(cfg: &MmfitConfig, workout: i32) -> Result<Vec<WindowPair>> {
    let left = load_stream(cfg, &cfg.path_for(&cfg.left_file, workout))?;
    let right = load_stream(cfg, &cfg.path_for(&cfg.right_file, workout))?;
    let labels = load_labels(cfg, &cfg.path_for(&cfg.labels_file, workout))?;
    let null = cfg
        .class_names
        .iter()
        .position(|c| *c == cfg.null_class)
        .ok_or_else(|| Error::Config(format!("null class {:?} not in class_names", cfg.null_class)))?
        as i64;

    let (Some(&l0), Some(&r0), Some(&l1), Some(&r1)) =
        (left.time.first(), right.time.first(), left.time.last(), right.time.last())
    else {
        return Err(Error::Adapter(format!("workout {workout:02}: empty accelerometer stream")));
    };
    let (start, end) = (l0.max(r0), l1.min(r1));
    if end <= start {
        return Err(Error::Adapter(format!(
            "workout {workout:02}: left and right streams do not overlap in time"
        )));
    }
    let ticks = ((end - start) * cfg.sample_rate_hz).floor() as usize + 1;
    let clock: Vec<f64> = (0..ticks).map(|i| start + i as f64 / cfg.sample_rate_hz).collect();
    let li = nearest_indices(&left.time, &clock);
    let ri = nearest_indices(&right.time, &clock);

    let stream = |s: &Stream, idx: &[usize]| -> Result<Tensor> {
        let data = (0..3).flat_map(|ax| idx.iter().map(move |&i| s.xyz[i][ax] as f32)).collect();
        Tensor::new([3, idx.len()], data)
    };
    let ls = stream(&left, &li)?;
    let rs = stream(&right, &ri)?;
    let sample_labels: Vec<i64> = li
        .iter()
        .map(|&i| {
            let frame = left.frame[i];
            labels
                .iter()
                .find(|iv| iv.start <= frame && frame <= iv.end)
                .map_or(null, |iv| iv.class)
        })
        .collect();

    let lw = window_stream(&ls, cfg.window_seconds, cfg.step_seconds, cfg.sample_rate_hz)?;
    let rw = window_stream(&rs, cfg.window_seconds, cfg.step_seconds, cfg.sample_rate_hz)?;
    Ok(lw
        .into_iter()
        .zip(rw)
        .map(|(l, r)| {
            let n = l.data.shape()[1];
            let label = label_window(&sample_labels[l.t0..l.t0 + n]).unwrap_or(null);
            WindowPair {
                left: l.data,
                right: r.data,
                label: label as i32,
                subject: workout,
                t0: l.t0 as i32,
            }
        })
        .collect())
}

/// All configured workouts. Missing files are reported together.
pub fn adapt_mmfit(cfg: &MmfitConfig) -> Result<WindowedDataset> {
    let missing: Vec<String> = cfg
        .workouts
        .iter()
        .flat_map(|&w| {
            [&cfg.left_file, &cfg.right_file, &cfg.labels_file]
                .into_iter()
                .map(move |p| cfg.path_for(p, w))
        })
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Adapter(format!("missing MM-Fit files: {}", missing.join(", "))));
    }
    let mut pairs = Vec::new();
    for &w in &cfg.workouts {
        pairs.extend(adapt_workout(cfg, w)?);
    }
    let window_len = (cfg.window_seconds * cfg.sample_rate_hz).round() as usize;
    WindowedDataset::new(
        pairs,
        cfg.sample_rate_hz,
        window_len,
        cfg.class_names.clone(),
        format!("mm-fit: {}", cfg.root.display()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_index_tracks_clock() {
        let times = [0.0, 0.011, 0.019, 0.031];
        assert_eq!(nearest_indices(&times, &[0.0, 0.01, 0.02, 0.03]), vec![0, 1, 2, 3]);
        assert_eq!(nearest_indices(&times, &[0.004, 0.006]), vec![0, 1]);
    }
}

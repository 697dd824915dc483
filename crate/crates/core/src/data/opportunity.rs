//! Opportunity adapter: lower-arm accelerometers with locomotion labels.
//!
//! Session files are whitespace-separated tables (`S{subject}-{session}.dat`).
//! Column indices are zero-based and must be supplied for the left (LLA) and
//! right (RLA) lower-arm accelerometers and the locomotion label. Missing
//! values are linearly interpolated within a session; leading and trailing
//! gaps take the nearest observed value. Windows whose majority label is
//! null (or unmapped) are dropped.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::mmfit::read_table;
use super::{label_window, window_stream, WindowPair, WindowedDataset};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpportunityConfig {
    pub root: PathBuf,
    pub file_pattern: String,
    pub lla_columns: [usize; 3],
    pub rla_columns: [usize; 3],
    pub label_column: usize,
    /// Raw locomotion code -> class name. Unlisted codes count as null.
    pub label_map: BTreeMap<String, String>,
    pub sample_rate_hz: f64,
    pub window_seconds: f64,
    pub step_seconds: f64,
    pub train_sessions: BTreeMap<String, Vec<String>>,
    pub test_sessions: BTreeMap<String, Vec<String>>,
}

impl Default for OpportunityConfig {
    fn default() -> Self {
        let adl = |n: usize| (1..=n).map(|i| format!("ADL{i}")).chain(["Drill".to_string()]).collect::<Vec<_>>();
        Self {
            root: PathBuf::from("OpportunityUCIDataset/dataset"),
            file_pattern: "S{subject}-{session}.dat".into(),
            lla_columns: [89, 90, 91],
            rla_columns: [63, 64, 65],
            label_column: 243,
            label_map: BTreeMap::from([
                ("1".into(), "stand".into()),
                ("2".into(), "walk".into()),
                ("4".into(), "sit".into()),
                ("5".into(), "lie".into()),
            ]),
            sample_rate_hz: 30.0,
            window_seconds: 2.0,
            step_seconds: 1.0,
            train_sessions: BTreeMap::from([
                ("1".into(), adl(5)),
                ("2".into(), adl(3)),
                ("3".into(), adl(3)),
            ]),
            test_sessions: BTreeMap::from([
                ("2".into(), vec!["ADL4".into(), "ADL5".into()]),
                ("3".into(), vec!["ADL4".into(), "ADL5".into()]),
            ]),
        }
    }
}

impl OpportunityConfig {
    /// Class names ordered by raw code.
    pub fn class_names(&self) -> Vec<String> {
        let mut entries: Vec<(i64, &String)> = self
            .label_map
            .iter()
            .filter_map(|(k, v)| k.parse::<i64>().ok().map(|c| (c, v)))
            .collect();
        entries.sort();
        entries.into_iter().map(|(_, v)| v.clone()).collect()
    }

    fn class_of(&self, raw: f64) -> i64 {
        if !raw.is_finite() {
            return -1;
        }
        let names = self.class_names();
        self.label_map
            .get(&(raw as i64).to_string())
            .and_then(|name| names.iter().position(|n| n == name))
            .map_or(-1, |p| p as i64)
    }

    pub fn session_path(&self, subject: &str, session: &str) -> PathBuf {
        self.root
            .join(self.file_pattern.replace("{subject}", subject).replace("{session}", session))
    }
}

#[derive(Debug, Clone)]
pub struct OpportunityData {
    pub train: WindowedDataset,
    pub test: WindowedDataset,
    /// Windows discarded because their majority label was null.
    pub dropped_null_windows: usize,
}

/// Fill NaNs by linear interpolation; edges copy the nearest finite value.
/// An all-NaN column becomes zeros.
pub fn interpolate_missing(values: &mut [f64]) {
    let known: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    };
    for i in 0..first {
        values[i] = values[first];
    }
    for i in last + 1..values.len() {
        values[i] = values[last];
    }
    for w in known.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in a + 1..b {
            let f = (i - a) as f64 / (b - a) as f64;
            values[i] = values[a] + f * (values[b] - values[a]);
        }
    }
}

fn load_session(cfg: &OpportunityConfig, subject: &str, session: &str, dropped: &mut usize) -> Result<Vec<WindowPair>> {
    let path = cfg.session_path(subject, session);
    let rows = read_table(&path)?;
    let need = cfg
        .lla_columns
        .iter()
        .chain(&cfg.rla_columns)
        .chain([&cfg.label_column])
        .max()
        .copied()
        .unwrap_or(0);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() <= need) {
        return Err(Error::Config(format!(
            "{}: row {i} has {} columns but column {need} is configured",
            path.display(),
            r.len()
        )));
    }
    let channel = |c: usize| {
        let mut v: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        interpolate_missing(&mut v);
        v
    };
    let stream = |cols: [usize; 3]| -> Result<Tensor> {
        let data = cols.iter().flat_map(|&c| channel(c).into_iter().map(|v| v as f32)).collect();
        Tensor::new([3, rows.len()], data)
    };
    let left = stream(cfg.lla_columns)?;
    let right = stream(cfg.rla_columns)?;
    let labels: Vec<i64> = rows.iter().map(|r| cfg.class_of(r[cfg.label_column])).collect();
    let subject_id: i32 = subject
        .parse()
        .map_err(|_| Error::Config(format!("subject {subject:?} is not an integer")))?;

    let lw = window_stream(&left, cfg.window_seconds, cfg.step_seconds, cfg.sample_rate_hz)?;
    let rw = window_stream(&right, cfg.window_seconds, cfg.step_seconds, cfg.sample_rate_hz)?;
    let mut out = Vec::new();
    for (l, r) in lw.into_iter().zip(rw) {
        let n = l.data.shape()[1];
        match label_window(&labels[l.t0..l.t0 + n]) {
            Some(label) if label >= 0 => out.push(WindowPair {
                left: l.data,
                right: r.data,
                label: label as i32,
                subject: subject_id,
                t0: l.t0 as i32,
            }),
            _ => *dropped += 1,
        }
    }
    Ok(out)
}

pub fn adapt_opportunity(cfg: &OpportunityConfig) -> Result<OpportunityData> {
    let missing: Vec<String> = cfg
        .train_sessions
        .iter()
        .chain(&cfg.test_sessions)
        .flat_map(|(s, sessions)| sessions.iter().map(move |x| cfg.session_path(s, x)))
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Adapter(format!("missing Opportunity files: {}", missing.join(", "))));
    }
    let overlap: Vec<String> = cfg
        .train_sessions
        .iter()
        .flat_map(|(s, xs)| xs.iter().map(move |x| (s, x)))
        .filter(|(s, x)| cfg.test_sessions.get(*s).is_some_and(|t| t.contains(x)))
        .map(|(s, x)| format!("S{s}-{x}"))
        .collect();
    if !overlap.is_empty() {
        return Err(Error::Config(format!("sessions in both train and test: {}", overlap.join(", "))));
    }

    let window_len = (cfg.window_seconds * cfg.sample_rate_hz).round() as usize;
    let mut dropped = 0;
    let mut build = |sessions: &BTreeMap<String, Vec<String>>, role: &str| -> Result<WindowedDataset> {
        let mut pairs = Vec::new();
        for (subject, list) in sessions {
            for session in list {
                pairs.extend(load_session(cfg, subject, session, &mut dropped)?);
            }
        }
        WindowedDataset::new(
            pairs,
            cfg.sample_rate_hz,
            window_len,
            cfg.class_names(),
            format!("opportunity {role}: {}", cfg.root.display()),
        )
    };
    let train = build(&cfg.train_sessions, "train")?;
    let test = build(&cfg.test_sessions, "test")?;
    Ok(OpportunityData {
        train,
        test,
        dropped_null_windows: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_fills_gaps_and_edges() {
        let mut v = [f64::NAN, 1.0, f64::NAN, f64::NAN, 4.0, f64::NAN];
        interpolate_missing(&mut v);
        assert_eq!(v, [1.0, 1.0, 2.0, 3.0, 4.0, 4.0]);
    }

    #[test]
    fn default_split_matches_protocol() {
        let cfg = OpportunityConfig::default();
        assert_eq!(cfg.class_names(), vec!["stand", "walk", "sit", "lie"]);
        let test: Vec<String> = cfg
            .test_sessions
            .iter()
            .flat_map(|(s, xs)| xs.iter().map(move |x| format!("S{s}-{x}")))
            .collect();
        assert_eq!(test, vec!["S2-ADL4", "S2-ADL5", "S3-ADL4", "S3-ADL5"]);
        assert_eq!(cfg.train_sessions["1"].len(), 6);
        assert_eq!(cfg.train_sessions["2"], vec!["ADL1", "ADL2", "ADL3", "Drill"]);
    }

    #[test]
    fn class_mapping_treats_null_and_nan_as_unlabeled() {
        let cfg = OpportunityConfig::default();
        assert_eq!(cfg.class_of(0.0), -1);
        assert_eq!(cfg.class_of(f64::NAN), -1);
        assert_eq!(cfg.class_of(4.0), 2);
    }
}

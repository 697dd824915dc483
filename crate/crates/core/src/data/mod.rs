//! Windowed left/right datasets.
//!
//! A [`WindowedDataset`] is an ordered list of [`WindowPair`]s cut from two
//! time-synchronised triaxial accelerometer streams. Everything downstream
//! (pretraining, finetuning, evaluation) consumes this type, and it is stored
//! on disk in the `LRW1` container of [`canonical`].

pub mod canonical;
pub mod mmfit;
pub mod opportunity;
mod split;
mod synth;
mod window;

pub use canonical::{read_canonical, write_canonical, DATASET_MAGIC};
pub use split::{SplitRole, SplitSpec};
pub use synth::{synth_generate, SynthConfig};
pub use window::{label_window, window_stream, Window};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ACCEL_CHANNELS;
use crate::tensor::Tensor;
use crate::Rng;

/// Label value of windows that carry no class.
pub const UNLABELED: i32 = -1;

/// One synchronised left/right window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    /// `[3, T]`
    pub left: Tensor,
    /// `[3, T]`
    pub right: Tensor,
    /// Class id or [`UNLABELED`].
    pub label: i32,
    pub subject: i32,
    /// Start index of the window in its source stream.
    pub t0: i32,
}

impl WindowPair {
    pub fn side(&self, side: Side) -> &Tensor {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn is_labeled(&self) -> bool {
        self.label >= 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err(Error::Config(format!("side must be left or right, got {s:?}"))),
        }
    }
}

/// Which windows of a pair become supervised examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputPolicy {
    Left,
    Right,
    /// Each side is an independent example (twice as many examples).
    Both,
}

impl InputPolicy {
    pub fn sides(self) -> &'static [Side] {
        match self {
            InputPolicy::Left => &[Side::Left],
            InputPolicy::Right => &[Side::Right],
            InputPolicy::Both => &[Side::Left, Side::Right],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub pairs: Vec<WindowPair>,
    pub sample_rate_hz: f64,
    pub window_len: usize,
    pub class_names: Vec<String>,
    pub provenance: String,
}

impl WindowedDataset {
    pub fn new(
        pairs: Vec<WindowPair>,
        sample_rate_hz: f64,
        window_len: usize,
        class_names: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let ds = Self {
            pairs,
            sample_rate_hz,
            window_len,
            class_names,
            provenance: provenance.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::Data(format!("sample rate {} must be positive", self.sample_rate_hz)));
        }
        if self.window_len == 0 {
            return Err(Error::Data("window length must be positive".into()));
        }
        let want = [ACCEL_CHANNELS, self.window_len];
        for (i, p) in self.pairs.iter().enumerate() {
            if p.left.shape() != want || p.right.shape() != want {
                return Err(Error::shape(
                    "dataset",
                    format!("window {i}"),
                    format!("{want:?}"),
                    format!("{:?}/{:?}", p.left.shape(), p.right.shape()),
                ));
            }
            if p.label < UNLABELED || p.label >= self.class_names.len() as i32 {
                return Err(Error::Label {
                    label: p.label as i64,
                    classes: self.class_names.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Labeled windows per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for p in self.pairs.iter().filter(|p| p.is_labeled()) {
            counts[p.label as usize] += 1;
        }
        counts
    }

    pub fn labeled_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_labeled()).count()
    }

    /// Same metadata, selected pairs.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
            ..self.empty_like()
        }
    }

    pub fn filter(&self, keep: impl Fn(&WindowPair) -> bool) -> Self {
        Self {
            pairs: self.pairs.iter().filter(|p| keep(p)).cloned().collect(),
            ..self.empty_like()
        }
    }

    pub fn empty_like(&self) -> Self {
        Self {
            pairs: Vec::new(),
            sample_rate_hz: self.sample_rate_hz,
            window_len: self.window_len,
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn labeled(&self) -> Self {
        self.filter(WindowPair::is_labeled)
    }

    /// Labeled `(window, class)` examples drawn from the sides in `policy`.
    pub fn examples(&self, policy: InputPolicy) -> Vec<(&Tensor, usize)> {
        let mut out = Vec::new();
        for &side in policy.sides() {
            out.extend(
                self.pairs
                    .iter()
                    .filter(|p| p.is_labeled())
                    .map(|p| (p.side(side), p.label as usize)),
            );
        }
        out
    }

    /// Per-channel `(mean, std)` pooled over both sides and all windows.
    pub fn channel_stats(&self) -> Vec<(f64, f64)> {
        let t = self.window_len;
        (0..ACCEL_CHANNELS)
            .map(|c| {
                let (mut sum, mut sq, mut n) = (0.0, 0.0, 0usize);
                for p in &self.pairs {
                    for w in [&p.left, &p.right] {
                        for &v in &w.data()[c * t..(c + 1) * t] {
                            sum += f64::from(v);
                            sq += f64::from(v).powi(2);
                            n += 1;
                        }
                    }
                }
                let mean = if n > 0 { sum / n as f64 } else { 0.0 };
                let var = if n > 0 { sq / n as f64 - mean * mean } else { 0.0 };
                (mean, var.max(0.0).sqrt().max(1e-12))
            })
            .collect()
    }

    /// Apply `(x - mean) / std` per channel to both sides.
    pub fn apply_standardization(&mut self, stats: &[(f64, f64)]) -> Result<()> {
        if stats.len() != ACCEL_CHANNELS {
            return Err(Error::shape("apply_standardization", "channels", ACCEL_CHANNELS, stats.len()));
        }
        let t = self.window_len;
        for p in &mut self.pairs {
            for w in [&mut p.left, &mut p.right] {
                for (c, &(mean, std)) in stats.iter().enumerate() {
                    for v in &mut w.data_mut()[c * t..(c + 1) * t] {
                        *v = ((f64::from(*v) - mean) / std) as f32;
                    }
                }
            }
        }
        Ok(())
    }

    /// Standardize with this dataset's own statistics, which are returned.
    pub fn standardize_channels(&mut self) -> Vec<(f64, f64)> {
        let stats = self.channel_stats();
        // Length always matches.
        let _ = self.apply_standardization(&stats);
        stats
    }
}

/// Stack windows into a `[B, 3, T]` batch.
pub fn stack_windows(windows: &[&Tensor]) -> Result<Tensor> {
    Tensor::stack(windows)
}

/// Keep exactly `n_per_class` labels per class, chosen uniformly without
/// replacement; every other window becomes [`UNLABELED`] but stays in the
/// dataset so it remains available for self-supervised pretraining.
pub fn subsample_labels(dataset: &WindowedDataset, n_per_class: usize, rng: &mut Rng) -> Result<WindowedDataset> {
    let mut out = dataset.clone();
    for p in &mut out.pairs {
        p.label = UNLABELED;
    }
    for (class, name) in dataset.class_names.iter().enumerate() {
        let members: Vec<usize> = dataset
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.label == class as i32)
            .map(|(i, _)| i)
            .collect();
        if members.len() < n_per_class {
            return Err(Error::Count {
                class: name.clone(),
                available: members.len(),
                requested: n_per_class,
            });
        }
        for k in rng.sample_indices(members.len(), n_per_class) {
            out.pairs[members[k]].label = class as i32;
        }
    }
    Ok(out)
}

/// Split labeled windows into `(train, validation)`, taking
/// `ceil(fraction * n_c)` windows of each class (at least one when the class
/// has two or more) for validation. Unlabeled windows stay in `train`.
pub fn stratified_split(dataset: &WindowedDataset, fraction: f64, rng: &mut Rng) -> Result<(WindowedDataset, WindowedDataset)> {
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::Config(format!("validation fraction {fraction} outside (0, 1)")));
    }
    let mut is_val = vec![false; dataset.len()];
    for class in 0..dataset.num_classes() {
        let mut members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.pairs[i].label == class as i32).collect();
        if members.len() < 2 {
            continue;
        }
        rng.shuffle(&mut members);
        let take = ((fraction * members.len() as f64).ceil() as usize).clamp(1, members.len() - 1);
        for &i in &members[..take] {
            is_val[i] = true;
        }
    }
    let pick = |want: bool| -> Vec<usize> { (0..dataset.len()).filter(|&i| is_val[i] == want).collect() };
    Ok((dataset.subset(&pick(false)), dataset.subset(&pick(true))))
}

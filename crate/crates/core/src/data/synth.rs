use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{WindowPair, WindowedDataset};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Rng;

/// Synthetic left/right activity generator.
///
/// Class `c >= 1` is a triaxial sinusoid with class-specific frequency,
/// per-axis amplitude and per-axis phase. Each window draws its own start
/// time, an amplitude scale and a frequency scale, so windows of one class
/// differ. Class 0 ("no activity") is a low-amplitude random-frequency
/// signal. The right side observes the same generative signal, shifted by a
/// bounded phase jitter and passed through the mirror matrix; both sides get
/// independent Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_classes: usize,
    /// Total windows; class of window `i` is `i % num_classes`.
    pub num_windows: usize,
    pub window_len: usize,
    pub sample_rate_hz: f64,
    pub noise_std: f64,
    /// Right-side phase offset is uniform in `[-phase_jitter, phase_jitter]` radians.
    pub phase_jitter: f64,
    pub amplitude: f64,
    /// Per-window amplitude scale is uniform in `1 +- amplitude_jitter`.
    pub amplitude_jitter: f64,
    /// Per-window frequency scale is uniform in `1 +- frequency_jitter`.
    pub frequency_jitter: f64,
    pub null_amplitude: f64,
    pub base_frequency_hz: f64,
    pub frequency_step_hz: f64,
    pub mirror: [[f64; 3]; 3],
    pub subject: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 6,
            num_windows: 2000,
            window_len: 60,
            sample_rate_hz: 30.0,
            noise_std: 0.1,
            phase_jitter: 0.2,
            amplitude: 1.0,
            amplitude_jitter: 0.3,
            frequency_jitter: 0.15,
            null_amplitude: 0.1,
            base_frequency_hz: 0.6,
            frequency_step_hz: 0.4,
            mirror: [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            subject: 0,
        }
    }
}

impl SynthConfig {
    pub fn class_names(&self) -> Vec<String> {
        (0..self.num_classes)
            .map(|c| if c == 0 { "no_activity".to_string() } else { format!("activity_{c}") })
            .collect()
    }

    /// `(frequency, per-axis amplitude, per-axis phase)` of class `c >= 1`.
    pub fn class_prototype(&self, c: usize) -> (f64, [f64; 3], [f64; 3]) {
        let freq = self.base_frequency_hz + self.frequency_step_hz * (c - 1) as f64;
        let dominant = (c - 1) % 3;
        let amp = std::array::from_fn(|ax| self.amplitude * if ax == dominant { 1.0 } else { 0.5 });
        // Golden-ratio sequence spreads phases without repeats across classes.
        let phase = std::array::from_fn(|ax| TAU * ((c * (ax + 1)) as f64 * 0.618_033_988_75).fract());
        (freq, amp, phase)
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "synthetic data needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.window_len == 0 || !(self.sample_rate_hz > 0.0) {
            return Err(Error::Config("window_len and sample_rate_hz must be positive".into()));
        }
        if self.noise_std < 0.0 || self.phase_jitter < 0.0 {
            return Err(Error::Config("noise_std and phase_jitter must be non-negative".into()));
        }
        Ok(())
    }
}

/// Draw a dataset; identical `(config, rng seed)` give bitwise-identical output.
pub fn synth_generate(cfg: &SynthConfig, rng: &mut Rng) -> Result<WindowedDataset> {
    cfg.validate()?;
    let t_len = cfg.window_len;
    let rate = cfg.sample_rate_hz;
    let mut pairs = Vec::with_capacity(cfg.num_windows);
    for i in 0..cfg.num_windows {
        let class = i % cfg.num_classes;
        let t0 = rng.below(1 << 20);
        let (freq, amp, phase) = if class == 0 {
            let f = rng.uniform_range(0.2, 4.0);
            let phase = std::array::from_fn(|_| rng.uniform() * TAU);
            (f, [cfg.null_amplitude; 3], phase)
        } else {
            let (f, a, p) = cfg.class_prototype(class);
            let fs = 1.0 + rng.uniform_range(-cfg.frequency_jitter, cfg.frequency_jitter);
            let s = 1.0 + rng.uniform_range(-cfg.amplitude_jitter, cfg.amplitude_jitter);
            (f * fs, a.map(|v| v * s), p)
        };
        let jitter = if cfg.phase_jitter > 0.0 {
            rng.uniform_range(-cfg.phase_jitter, cfg.phase_jitter)
        } else {
            0.0
        };
        let signal = |ax: usize, t: usize, shift: f64| {
            amp[ax] * (TAU * freq * (t0 + t) as f64 / rate + phase[ax] + shift).sin()
        };
        let mut left = vec![0.0f32; 3 * t_len];
        let mut right = vec![0.0f32; 3 * t_len];
        for t in 0..t_len {
            let l = [signal(0, t, 0.0), signal(1, t, 0.0), signal(2, t, 0.0)];
            let r = [signal(0, t, jitter), signal(1, t, jitter), signal(2, t, jitter)];
            for ax in 0..3 {
                let mirrored: f64 = (0..3).map(|j| cfg.mirror[ax][j] * r[j]).sum();
                left[ax * t_len + t] = l[ax] as f32;
                right[ax * t_len + t] = mirrored as f32;
            }
        }
        if cfg.noise_std > 0.0 {
            for v in left.iter_mut().chain(right.iter_mut()) {
                *v += (cfg.noise_std * rng.normal()) as f32;
            }
        }
        pairs.push(WindowPair {
            left: Tensor::new([3, t_len], left)?,
            right: Tensor::new([3, t_len], right)?,
            label: class as i32,
            subject: cfg.subject,
            t0: (t0 % i32::MAX as usize) as i32,
        });
    }
    WindowedDataset::new(
        pairs,
        rate,
        t_len,
        cfg.class_names(),
        format!("synthetic: {}", serde_json::to_string(cfg)?),
    )
}

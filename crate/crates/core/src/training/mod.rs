//! Optimizers, the cosine schedule and the three training loops.

mod classify;
mod optim;
mod pretrain;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use classify::{finetune, finetune_with_monitor, train_supervised, EarlyStopping, FinetuneConfig, FinetuneOutput, FreezePolicy, StopDecision};
pub use optim::{adam_step, sgd_step, AdamHyper, AdamState, Sgd};
pub use pretrain::{pretrain_lr_ssl, pretrain_simclr, PretrainConfig, PretrainOutput};

use crate::error::{Error, Result};

/// `base_lr * 0.5 * (1 + cos(pi * step / total_steps))`.
pub fn cosine_lr(step: usize, total_steps: usize, base_lr: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::param("cosine_lr", "total_steps must be positive"));
    }
    if step > total_steps {
        return Err(Error::param("cosine_lr", format!("step {step} exceeds total_steps {total_steps}")));
    }
    let frac = step as f64 / total_steps as f64;
    Ok(base_lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSplit {
    /// One optimizer step.
    Train,
    /// Mean training loss over an epoch.
    TrainEpoch,
    /// Validation loss after an epoch.
    Validation,
}

impl TraceSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::TrainEpoch => "train_epoch",
            Self::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    /// Optimizer steps completed when the value was recorded.
    pub step: usize,
    /// 1-based epoch.
    pub epoch: usize,
    pub split: TraceSplit,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub records: Vec<LossRecord>,
}

impl LossTrace {
    pub fn push(&mut self, step: usize, epoch: usize, split: TraceSplit, value: f64) {
        self.records.push(LossRecord {
            step,
            epoch,
            split,
            value,
        });
    }

    pub fn values(&self, split: TraceSplit) -> Vec<f64> {
        self.records.iter().filter(|r| r.split == split).map(|r| r.value).collect()
    }

    pub fn steps(&self) -> usize {
        self.values(TraceSplit::Train).len()
    }

    pub fn epochs(&self) -> usize {
        self.records.iter().map(|r| r.epoch).max().unwrap_or(0)
    }

    /// Columns `step,epoch,split,value`; values use shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,epoch,split,value\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{}", r.step, r.epoch, r.split.as_str(), r.value);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn check_finite(loss: f64, epoch: usize, step: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericFailure { epoch, step })
    }
}

//! The single JSON configuration document. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use lrcl_core::data::mmfit::MmfitConfig;
use lrcl_core::data::opportunity::OpportunityConfig;
use lrcl_core::data::{InputPolicy, Side, SynthConfig};
use lrcl_core::eval::Method;
use lrcl_core::model::{DEFAULT_DROPOUT, DEFAULT_LATENT};
use lrcl_core::training::{FinetuneConfig, FreezePolicy, PretrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneSection,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Canonical dataset used for pretraining and as the labeled pool.
    pub path: Option<PathBuf>,
    pub validation_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    /// Held-out share of labeled windows when `validation_path` is unset.
    pub validation_fraction: f64,
    /// Seed for synthetic generation and the validation split.
    pub seed: u64,
    /// Per-channel standardization after loading.
    pub standardize: bool,
    pub synth: SynthConfig,
    pub adapter: Option<AdapterSpec>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            validation_path: None,
            test_path: None,
            validation_fraction: 0.2,
            seed: 0,
            standardize: false,
            synth: SynthConfig::default(),
            adapter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdapterSpec {
    Mmfit(MmfitConfig),
    Opportunity(OpportunityConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub dropout: f64,
    pub latent_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dropout: DEFAULT_DROPOUT,
            latent_size: DEFAULT_LATENT,
        }
    }
}

/// Classifier training settings plus the pretrained checkpoint and label
/// budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneSection {
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub freeze_policy: FreezePolicy,
    pub input_policy: InputPolicy,
    /// Pretrained checkpoint for `finetune` and `experiment reduced_labels`.
    pub checkpoint: Option<PathBuf>,
    pub labels_per_class: Option<usize>,
}

impl Default for FinetuneSection {
    fn default() -> Self {
        let d = FinetuneConfig::default();
        Self {
            lr: d.lr,
            epochs: d.epochs,
            patience: d.patience,
            batch_size: d.batch_size,
            seed: d.seed,
            freeze_policy: d.freeze_policy,
            input_policy: d.input_policy,
            checkpoint: None,
            labels_per_class: None,
        }
    }
}

impl FinetuneSection {
    pub fn train(&self) -> FinetuneConfig {
        FinetuneConfig {
            lr: self.lr,
            epochs: self.epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            seed: self.seed,
            freeze_policy: self.freeze_policy,
            input_policy: self.input_policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub side: Side,
    /// Finetuned checkpoint scored by `evaluate`.
    pub checkpoint: Option<PathBuf>,
    pub repeats: usize,
    /// Explicit seeds for `experiment repeats`; empty means seed, seed+1, ...
    pub seeds: Vec<u64>,
    pub method: Method,
    pub label_counts: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub latent_sizes: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            side: Side::Left,
            checkpoint: None,
            repeats: 10,
            seeds: Vec::new(),
            method: Method::LrSsl,
            label_counts: vec![1, 5, 10, 50, 100],
            batch_sizes: vec![16, 32, 64, 128],
            latent_sizes: vec![32, 64, 96, 128],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Sections that determine model weights and scores. Paths are left out
    /// so reruns in other directories produce identical artifacts.
    pub fn echo(&self) -> Value {
        json!({
            "model": self.model,
            "pretrain": self.pretrain,
            "finetune": {
                "train": self.finetune.train(),
                "labels_per_class": self.finetune.labels_per_class,
            },
            "eval": { "side": self.eval.side },
            "data": {
                "validation_fraction": self.data.validation_fraction,
                "seed": self.data.seed,
                "standardize": self.data.standardize,
            },
        })
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) if !map.is_empty() => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Every configuration key with its default, one per line.
pub fn keys_help() -> String {
    let mut rows = Vec::new();
    flatten("", &serde_json::to_value(Config::default()).unwrap_or(Value::Null), &mut rows);
    for (kind, v) in [
        ("mmfit", serde_json::to_value(MmfitConfig::default())),
        ("opportunity", serde_json::to_value(OpportunityConfig::default())),
    ] {
        rows.push(("data.adapter.kind".to_string(), format!("\"{kind}\"")));
        let mut sub = Vec::new();
        flatten("data.adapter", &v.unwrap_or(Value::Null), &mut sub);
        rows.extend(sub);
    }
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from(
        "Configuration keys (JSON, unknown keys rejected) and defaults.\n\
         data.adapter is either kind \"mmfit\" or kind \"opportunity\":\n\n",
    );
    for (k, v) in rows {
        s.push_str(&format!("  {k:width$}  {v}\n"));
    }
    s
}

//! Subcommand implementations. Each returns a [`Failure`] carrying the
//! process exit code.

use std::fmt;
use std::path::{Path, PathBuf};

use lrcl_core::data::{
    read_canonical, stratified_split, synth_generate, write_canonical, Side, SplitSpec, WindowedDataset,
};
use lrcl_core::data::{mmfit::adapt_mmfit, opportunity::adapt_opportunity};
use lrcl_core::eval::{
    curve_csv, evaluate, label_subset, reduced_label_curve, repeats, repeats_csv, sweep, sweep_csv, ExperimentData,
    PipelineConfig, RunReport,
};
use lrcl_core::model::{Checkpoint, ClassifierParams, EncoderParams, HarModel, HeadParams, ACCEL_CHANNELS};
use lrcl_core::training::{finetune, pretrain_lr_ssl, pretrain_simclr, train_supervised, FinetuneOutput, PretrainOutput};
use lrcl_core::{Error, Rng};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{AdapterSpec, Config};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CORRUPT: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Corrupt { .. } => EXIT_CORRUPT,
            Error::NumericFailure { .. } => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Experiment tables produced by `experiment`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    ReducedLabels,
    Sweep,
    Repeats,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ReducedLabels => "reduced_labels",
            Self::Sweep => "sweep",
            Self::Repeats => "repeats",
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, s)
}

fn out_dir(cfg: &Config) -> Outcome<PathBuf> {
    let dir = cfg.output.directory.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn load(path: &Path) -> Outcome<WindowedDataset> {
    Ok(read_canonical(path)?)
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Outcome<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Failure::usage(format!("config key {key} is required for this command")))
}

/// Datasets after optional standardization with training statistics.
struct Prepared {
    /// Full training file; pretraining ignores labels.
    pool: WindowedDataset,
    /// Labeled training windows left after the validation split.
    labeled: WindowedDataset,
    validation: WindowedDataset,
    test: Option<WindowedDataset>,
    standardization: Option<Vec<(f64, f64)>>,
}

fn prepare(cfg: &Config, need_labels: bool) -> Outcome<Prepared> {
    let mut pool = load(required(&cfg.data.path, "data.path")?)?;
    let stats = cfg.data.standardize.then(|| pool.standardize_channels());
    let standardized = |mut ds: WindowedDataset| -> Outcome<WindowedDataset> {
        if let Some(s) = &stats {
            ds.apply_standardization(s)?;
        }
        Ok(ds)
    };
    let test = cfg.data.test_path.as_deref().map(load).transpose()?.map(standardized).transpose()?;
    let (labeled, validation) = match &cfg.data.validation_path {
        Some(p) => (pool.labeled(), standardized(load(p)?)?),
        None if need_labels => {
            let mut rng = Rng::new(cfg.data.seed);
            let (train, val) = stratified_split(&pool.labeled(), cfg.data.validation_fraction, &mut rng)?;
            (train, val)
        }
        None => (pool.labeled(), pool.empty_like()),
    };
    if need_labels && labeled.is_empty() {
        return Err(Failure::usage(format!(
            "{} has no labeled windows",
            cfg.data.path.as_deref().unwrap_or(Path::new("")).display()
        )));
    }
    Ok(Prepared {
        pool,
        labeled,
        validation,
        test,
        standardization: stats,
    })
}

fn data_echo(ds: &WindowedDataset, stats: &Option<Vec<(f64, f64)>>) -> Value {
    json!({
        "class_names": ds.class_names,
        "window_len": ds.window_len,
        "sample_rate_hz": ds.sample_rate_hz,
        "standardization": stats,
    })
}

fn checkpoint_config(cfg: &Config, data: Value) -> Value {
    let mut v = cfg.echo();
    if let (Some(obj), Value::Object(extra)) = (v.get_mut("data").and_then(Value::as_object_mut), data) {
        obj.extend(extra);
    }
    v
}

fn print_report(label: &str, r: &RunReport) {
    println!(
        "{label}: accuracy {:.4}, macro F1 {:.4}, weighted F1 {:.4} ({} windows, side {:?})",
        r.accuracy, r.macro_f1, r.weighted_f1, r.evaluated, r.side
    );
}

pub fn synth(cfg: &Config, out: Option<&Path>) -> Outcome {
    let ds = synth_generate(&cfg.data.synth, &mut Rng::new(cfg.data.seed))?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.directory.join("synth.lrw"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    }
    write_canonical(&ds, &path)?;
    println!(
        "wrote {}: {} classes, {} windows, T={}",
        path.display(),
        ds.num_classes(),
        ds.len(),
        ds.window_len
    );
    Ok(())
}

pub fn ingest(cfg: &Config) -> Outcome {
    let spec = cfg
        .data
        .adapter
        .as_ref()
        .ok_or_else(|| Failure::usage("config key data.adapter is required for ingest"))?;
    let dir = out_dir(cfg)?;
    let mut manifest = serde_json::Map::new();
    let mut emit = |stem: &str, ds: &WindowedDataset, extra: Value| -> Outcome {
        let file = dir.join(format!("{stem}.lrw"));
        write_canonical(ds, &file)?;
        let mut subjects: Vec<i32> = ds.pairs.iter().map(|p| p.subject).collect();
        subjects.sort_unstable();
        subjects.dedup();
        println!("{stem}: {} windows from {} subjects -> {}", ds.len(), subjects.len(), file.display());
        let mut entry = json!({
            "file": format!("{stem}.lrw"),
            "windows": ds.len(),
            "subjects": subjects,
            "class_counts": ds.class_counts(),
        });
        if let (Some(o), Value::Object(x)) = (entry.as_object_mut(), extra) {
            o.extend(x);
        }
        manifest.insert(stem.to_string(), entry);
        Ok(())
    };
    let kind = match spec {
        AdapterSpec::Mmfit(m) => {
            let ds = adapt_mmfit(m)?;
            let split = SplitSpec::mmfit();
            for (role, part) in split.apply(&ds) {
                emit(role.file_stem(), &part, Value::Null)?;
            }
            "mmfit"
        }
        AdapterSpec::Opportunity(o) => {
            let data = adapt_opportunity(o)?;
            println!("dropped {} windows with a null majority label", data.dropped_null_windows);
            emit("train", &data.train, Value::Null)?;
            emit("test", &data.test, Value::Null)?;
            manifest.insert("dropped_null_windows".into(), json!(data.dropped_null_windows));
            "opportunity"
        }
    };
    manifest.insert("kind".into(), json!(kind));
    write_json(&dir.join("manifest.json"), &Value::Object(manifest))
}

/// Left-right pretraining (`simclr == false`) or the rotation baseline.
pub fn pretrain(cfg: &Config, simclr: bool) -> Outcome {
    let prep = prepare(cfg, false)?;
    if prep.pool.pairs.first().is_some_and(|p| p.left.shape()[0] != ACCEL_CHANNELS) {
        return Err(Failure::usage("dataset windows must have 3 channels"));
    }
    let mut rng = Rng::new(cfg.pretrain.seed);
    let encoder = EncoderParams::init(ACCEL_CHANNELS, cfg.model.dropout, &mut rng);
    let head = HeadParams::init(cfg.model.latent_size, &mut rng);
    let PretrainOutput { encoder, head, trace } = if simclr {
        pretrain_simclr(&prep.pool, encoder, head, &cfg.pretrain)?
    } else {
        pretrain_lr_ssl(&prep.pool, encoder, head, &cfg.pretrain)?
    };
    let stem = if simclr { "simclr" } else { "pretrain" };
    let dir = out_dir(cfg)?;
    let mut ck = Checkpoint::new(checkpoint_config(cfg, data_echo(&prep.pool, &prep.standardization)), cfg.pretrain.seed);
    ck.add("encoder", &encoder).add("head", &head);
    ck.save(dir.join(format!("{stem}.lrck")))?;
    trace.write_csv(dir.join(format!("{stem}_loss.csv")))?;
    let last = trace.values(lrcl_core::training::TraceSplit::TrainEpoch).last().copied().unwrap_or(f64::NAN);
    println!(
        "{stem}: {} epochs, {} steps, final epoch loss {last:.5} -> {}",
        trace.epochs(),
        trace.steps(),
        dir.join(format!("{stem}.lrck")).display()
    );
    Ok(())
}

fn finish_classifier(cfg: &Config, stem: &str, prep: &Prepared, out: FinetuneOutput, seed: u64) -> Outcome {
    let dir = out_dir(cfg)?;
    let mut config = checkpoint_config(cfg, data_echo(&prep.pool, &prep.standardization));
    config["best_epoch"] = json!(out.best_epoch);
    let mut ck = Checkpoint::new(config, seed);
    ck.add("encoder", &out.model.encoder).add("classifier", &out.model.classifier);
    ck.save(dir.join(format!("{stem}.lrck")))?;
    out.trace.write_csv(dir.join(format!("{stem}_loss.csv")))?;

    let (target, label) = match &prep.test {
        Some(t) => (t, "test"),
        None => {
            log::warn!("data.test_path unset; reporting on the validation set");
            (&prep.validation, "validation")
        }
    };
    let mut report = evaluate(&out.model, target, cfg.eval.side, seed)?;
    report.best_epoch = Some(out.best_epoch);
    report.config = cfg.echo();
    write_json(&dir.join(format!("{stem}_report.json")), &report)?;
    write(&dir.join(format!("{stem}_confusion.csv")), report.confusion.to_csv())?;
    println!("{stem}: {} epochs run, best epoch {}", out.epochs_run, out.best_epoch);
    print_report(label, &report);
    Ok(())
}

fn labeled_subset(cfg: &Config, prep: &Prepared) -> Outcome<WindowedDataset> {
    Ok(label_subset(&prep.labeled, cfg.finetune.labels_per_class, cfg.finetune.seed)?)
}

pub fn finetune_cmd(cfg: &Config) -> Outcome {
    let ck_path = required(&cfg.finetune.checkpoint, "finetune.checkpoint")?;
    let ck = Checkpoint::load(ck_path)?;
    let prep = prepare(cfg, true)?;
    let train = labeled_subset(cfg, &prep)?;
    let mut encoder = ck.encoder()?;
    encoder.dropout_rate = cfg.model.dropout;
    let classes = train.num_classes();
    let classifier = if ck.has_component("classifier") {
        let c = ck.classifier()?;
        if c.num_classes() != classes {
            return Err(Failure::usage(format!(
                "checkpoint classifier has {} classes, data has {classes}",
                c.num_classes()
            )));
        }
        c
    } else {
        ClassifierParams::init(classes, &mut Rng::new(cfg.finetune.seed))
    };
    let out = finetune(encoder, classifier, &train, &prep.validation, &cfg.finetune.train())?;
    finish_classifier(cfg, "finetune", &prep, out, cfg.finetune.seed)
}

pub fn supervised(cfg: &Config) -> Outcome {
    let prep = prepare(cfg, true)?;
    let train = labeled_subset(cfg, &prep)?;
    let ft = cfg.finetune.train();
    let out = train_supervised(&train, &prep.validation, &ft, ft.input_policy, cfg.model.dropout)?;
    finish_classifier(cfg, "supervised", &prep, out, cfg.finetune.seed)
}

pub fn evaluate_cmd(cfg: &Config) -> Outcome {
    let ck = Checkpoint::load(required(&cfg.eval.checkpoint, "eval.checkpoint")?)?;
    if !ck.has_component("classifier") {
        return Err(Failure::usage("eval.checkpoint has no classifier; finetune it first"));
    }
    let model = HarModel {
        encoder: ck.encoder()?,
        classifier: ck.classifier()?,
    };
    let path = match (&cfg.data.test_path, &cfg.data.path) {
        (Some(p), _) => p,
        (None, Some(p)) => {
            log::warn!("data.test_path unset; evaluating on data.path");
            p
        }
        (None, None) => return Err(Failure::usage("config key data.test_path is required for evaluate")),
    };
    let mut ds = load(path)?;
    if let Some(stats) = ck.config.pointer("/data/standardization").filter(|v| !v.is_null()) {
        let stats: Vec<(f64, f64)> = serde_json::from_value(stats.clone())
            .map_err(|e| Failure { code: EXIT_CORRUPT, message: format!("checkpoint standardization: {e}") })?;
        ds.apply_standardization(&stats)?;
    }
    let mut report = evaluate(&model, &ds, cfg.eval.side, ck.seed)?;
    report.best_epoch = ck.config.get("best_epoch").and_then(Value::as_u64).map(|v| v as usize);
    report.config = cfg.echo();
    let dir = out_dir(cfg)?;
    write_json(&dir.join("evaluate_report.json"), &report)?;
    write(&dir.join("evaluate_confusion.csv"), report.confusion.to_csv())?;
    print_report("evaluate", &report);
    Ok(())
}

pub fn experiment(cfg: &Config, kind: ExperimentKind, base_seed: u64) -> Outcome {
    let prep = prepare(cfg, true)?;
    let test = match &prep.test {
        Some(t) => t,
        None => {
            log::warn!("data.test_path unset; scoring on the validation set");
            &prep.validation
        }
    };
    let data = ExperimentData {
        pretrain: &prep.pool,
        train: &prep.labeled,
        validation: &prep.validation,
        test,
    };
    let pipeline = PipelineConfig {
        pretrain: cfg.pretrain.clone(),
        finetune: cfg.finetune.train(),
        latent_size: cfg.model.latent_size,
        dropout: cfg.model.dropout,
        labels_per_class: cfg.finetune.labels_per_class,
        side: cfg.eval.side,
    };
    let dir = out_dir(cfg)?;
    let stem = kind.as_str();
    match kind {
        ExperimentKind::Repeats => {
            let seeds: Vec<u64> = if cfg.eval.seeds.is_empty() {
                (0..cfg.eval.repeats as u64).map(|i| base_seed + i).collect()
            } else {
                cfg.eval.seeds.clone()
            };
            let (reports, agg) = repeats(&data, &pipeline, cfg.eval.method, &seeds)?;
            write(&dir.join(format!("{stem}.csv")), repeats_csv(&reports, &agg))?;
            write_json(&dir.join(format!("{stem}.json")), &json!({ "runs": reports, "aggregate": agg }))?;
            println!(
                "{} runs of {}: macro F1 {:.4} +- {:.4}, accuracy {:.4} +- {:.4}",
                agg.runs,
                cfg.eval.method.as_str(),
                agg.macro_f1.mean,
                agg.macro_f1.std,
                agg.accuracy.mean,
                agg.accuracy.std
            );
        }
        ExperimentKind::ReducedLabels => {
            let ck = Checkpoint::load(required(&cfg.finetune.checkpoint, "finetune.checkpoint")?)?;
            let mut encoder = ck.encoder()?;
            encoder.dropout_rate = cfg.model.dropout;
            let rows = reduced_label_curve(&encoder, &data, &pipeline, &cfg.eval.label_counts, cfg.eval.repeats, base_seed)?;
            if rows.iter().all(|r| r.aggregate.is_none()) {
                return Err(Failure::usage("every reduced-label cell failed"));
            }
            write(&dir.join(format!("{stem}.csv")), curve_csv(&rows))?;
            write_json(&dir.join(format!("{stem}.json")), &rows)?;
            println!("{} rows -> {}", rows.len(), dir.join(format!("{stem}.csv")).display());
        }
        ExperimentKind::Sweep => {
            let cells = sweep(&data, &pipeline, &cfg.eval.batch_sizes, &cfg.eval.latent_sizes, cfg.eval.repeats, base_seed)?;
            if cells.iter().all(|c| c.aggregate.is_none()) {
                return Err(Failure::usage("every sweep cell failed"));
            }
            write(&dir.join(format!("{stem}.csv")), sweep_csv(&cells))?;
            write_json(&dir.join(format!("{stem}.json")), &cells)?;
            println!("{} cells -> {}", cells.len(), dir.join(format!("{stem}.csv")).display());
        }
    }
    Ok(())
}

/// Command-line overrides; `None` keeps the configured value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub temperature: Option<f64>,
    pub lr: Option<f64>,
    pub labels_per_class: Option<usize>,
    pub side: Option<Side>,
}

/// Which training phase `--epochs`, `--batch-size` and `--lr` refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Classifier,
    Both,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut Config, phase: Phase, out_is_dir: bool) {
        if let (Some(o), true) = (&self.out, out_is_dir) {
            cfg.output.directory = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.data.seed = s;
            cfg.pretrain.seed = s;
            cfg.finetune.seed = s;
        }
        let pre = matches!(phase, Phase::Pretrain | Phase::Both);
        let cls = matches!(phase, Phase::Classifier | Phase::Both);
        if let Some(e) = self.epochs {
            if pre {
                cfg.pretrain.epochs = e;
            }
            if cls {
                cfg.finetune.epochs = e;
            }
        }
        if let Some(b) = self.batch_size {
            if pre {
                cfg.pretrain.batch_size = b;
            }
            if cls {
                cfg.finetune.batch_size = b;
            }
        }
        if let Some(lr) = self.lr {
            if pre {
                cfg.pretrain.base_lr = lr;
            }
            if cls {
                cfg.finetune.lr = lr;
            }
        }
        if let Some(t) = self.temperature {
            cfg.pretrain.temperature = t;
        }
        if let Some(n) = self.labels_per_class {
            cfg.finetune.labels_per_class = Some(n);
        }
        if let Some(s) = self.side {
            cfg.eval.side = s;
            cfg.pretrain.simclr_side = s;
        }
    }
}

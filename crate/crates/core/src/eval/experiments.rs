//! Full pipelines and the grids built from them: repeats, reduced-label
//! curves and batch/latent sweeps. Cells run in parallel with seed
//! `base_seed + cell index`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{aggregate, evaluate, AggregateReport, MeanStd, RunReport};
use crate::data::{subsample_labels, Side, WindowedDataset};
use crate::error::{Error, Result};
use crate::model::{ClassifierParams, EncoderParams, HeadParams, ACCEL_CHANNELS, DEFAULT_DROPOUT, DEFAULT_LATENT};
use crate::par;
use crate::training::{finetune, pretrain_lr_ssl, pretrain_simclr, train_supervised, FinetuneConfig, FinetuneOutput, PretrainConfig};
use crate::Rng;

/// Datasets feeding one pipeline run. `pretrain` needs no labels; `train`
/// supplies the labeled windows (optionally subsampled per class).
#[derive(Debug, Clone, Copy)]
pub struct ExperimentData<'a> {
    pub pretrain: &'a WindowedDataset,
    pub train: &'a WindowedDataset,
    pub validation: &'a WindowedDataset,
    pub test: &'a WindowedDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Left-right contrastive pretraining, then finetune.
    LrSsl,
    /// Rotation-view pretraining, then finetune.
    Simclr,
    /// Encoder and classifier from scratch.
    Supervised,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LrSsl => "lr_ssl",
            Self::Simclr => "simclr",
            Self::Supervised => "supervised",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    pub latent_size: usize,
    pub dropout: f64,
    /// Keep this many labels per class from the training set.
    pub labels_per_class: Option<usize>,
    /// Device used at evaluation.
    pub side: Side,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pretrain: PretrainConfig::default(),
            finetune: FinetuneConfig::default(),
            latent_size: DEFAULT_LATENT,
            dropout: DEFAULT_DROPOUT,
            labels_per_class: None,
            side: Side::Left,
        }
    }
}

// Separate stream so label subsets do not depend on the method.
const LABEL_STREAM: u64 = 0x6c61_6265_6c73;

/// Labeled subset for one cell; both arms of a paired comparison call this
/// with the same seed.
pub fn label_subset(train: &WindowedDataset, per_class: Option<usize>, seed: u64) -> Result<WindowedDataset> {
    match per_class {
        Some(n) => Ok(subsample_labels(train, n, &mut Rng::new(seed ^ LABEL_STREAM))?.labeled()),
        None => Ok(train.labeled()),
    }
}

fn finish(out: FinetuneOutput, data: &ExperimentData<'_>, cfg: &PipelineConfig, seed: u64) -> Result<RunReport> {
    let mut report = evaluate(&out.model, data.test, cfg.side, seed)?;
    report.best_epoch = Some(out.best_epoch);
    report.config = serde_json::to_value(cfg)?;
    Ok(report)
}

/// Pretrain (unless supervised), train the classifier, score on `test`.
pub fn run_pipeline(data: &ExperimentData<'_>, cfg: &PipelineConfig, method: Method, seed: u64) -> Result<RunReport> {
    let mut cfg = cfg.clone();
    cfg.pretrain.seed = seed;
    cfg.finetune.seed = seed;
    let labeled = label_subset(data.train, cfg.labels_per_class, seed)?;
    let out = match method {
        Method::Supervised => train_supervised(&labeled, data.validation, &cfg.finetune, cfg.finetune.input_policy, cfg.dropout)?,
        Method::LrSsl | Method::Simclr => {
            let mut rng = Rng::new(seed);
            let encoder = EncoderParams::init(ACCEL_CHANNELS, cfg.dropout, &mut rng);
            let head = HeadParams::init(cfg.latent_size, &mut rng);
            let pre = if method == Method::LrSsl {
                pretrain_lr_ssl(data.pretrain, encoder, head, &cfg.pretrain)?
            } else {
                pretrain_simclr(data.pretrain, encoder, head, &cfg.pretrain)?
            };
            let classifier = ClassifierParams::init(labeled.num_classes(), &mut rng);
            finetune(pre.encoder, classifier, &labeled, data.validation, &cfg.finetune)?
        }
    };
    finish(out, data, &cfg, seed)
}

/// Run one pipeline per seed in parallel. Failed runs are logged; the call
/// fails only if every run fails.
pub fn repeats(
    data: &ExperimentData<'_>,
    cfg: &PipelineConfig,
    method: Method,
    seeds: &[u64],
) -> Result<(Vec<RunReport>, AggregateReport)> {
    let results = par::map_indexed(seeds.len(), |i| run_pipeline(data, cfg, method, seeds[i]));
    let mut reports = Vec::new();
    let mut first_err = None;
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => {
                log::error!("run with seed {seed} failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    if reports.is_empty() {
        return Err(first_err.unwrap_or(Error::Config("no seeds given".into())));
    }
    let agg = aggregate(&reports)?;
    Ok((reports, agg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub labels_per_class: usize,
    pub method: Method,
    /// `None` when every repeat was skipped or failed.
    pub aggregate: Option<AggregateReport>,
    pub failed: usize,
}

/// Finetune `encoder` and train a scratch model on identical label subsets
/// for each `count` and repeat. Rows are ordered by count, SSL first.
pub fn reduced_label_curve(
    encoder: &EncoderParams,
    data: &ExperimentData<'_>,
    cfg: &PipelineConfig,
    counts: &[usize],
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<CurveRow>> {
    if repeats == 0 {
        return Err(Error::param("reduced_label_curve", "repeats must be >= 1"));
    }
    let cells = counts.len() * repeats;
    let results = par::map_indexed(cells, |i| {
        let count = counts[i / repeats];
        let seed = base_seed + i as u64;
        let subset = match label_subset(data.train, Some(count), seed) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("skipping {count} labels/class: {e}");
                return [Err(e.to_string()), Err(String::new())];
            }
        };
        let mut ft = cfg.finetune.clone();
        ft.seed = seed;
        let ssl = ClassifierParams::init(subset.num_classes(), &mut Rng::new(seed))
            .pipe(|cls| finetune(encoder.clone(), cls, &subset, data.validation, &ft))
            .and_then(|o| finish(o, data, cfg, seed));
        let sup = train_supervised(&subset, data.validation, &ft, ft.input_policy, cfg.dropout)
            .and_then(|o| finish(o, data, cfg, seed));
        [ssl.map_err(|e| e.to_string()), sup.map_err(|e| e.to_string())]
    });

    let mut rows = Vec::new();
    for (ci, &count) in counts.iter().enumerate() {
        for (arm, method) in [Method::LrSsl, Method::Supervised].into_iter().enumerate() {
            let mut ok = Vec::new();
            let mut failed = 0;
            for r in &results[ci * repeats..(ci + 1) * repeats] {
                match &r[arm] {
                    Ok(rep) => ok.push(rep.clone()),
                    Err(e) => {
                        if !e.is_empty() {
                            log::warn!("{} at {count} labels/class: {e}", method.as_str());
                        }
                        failed += 1;
                    }
                }
            }
            rows.push(CurveRow {
                labels_per_class: count,
                method,
                aggregate: if ok.is_empty() { None } else { Some(aggregate(&ok)?) },
                failed,
            });
        }
    }
    Ok(rows)
}

trait Pipe: Sized {
    fn pipe<R>(self, f: impl FnOnce(Self) -> R) -> R {
        f(self)
    }
}

impl<T> Pipe for T {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub batch_size: usize,
    pub latent_size: usize,
    pub aggregate: Option<AggregateReport>,
    /// Messages of failed repeats.
    pub errors: Vec<String>,
}

/// Full left-right pipeline for every (batch size, latent size) pair.
pub fn sweep(
    data: &ExperimentData<'_>,
    cfg: &PipelineConfig,
    batch_sizes: &[usize],
    latent_sizes: &[usize],
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<SweepCell>> {
    if repeats == 0 {
        return Err(Error::param("sweep", "repeats must be >= 1"));
    }
    let grid: Vec<(usize, usize)> = batch_sizes
        .iter()
        .flat_map(|&b| latent_sizes.iter().map(move |&l| (b, l)))
        .collect();
    let results = par::map_indexed(grid.len() * repeats, |i| {
        let (b, l) = grid[i / repeats];
        let mut c = cfg.clone();
        c.pretrain.batch_size = b;
        c.latent_size = l;
        run_pipeline(data, &c, Method::LrSsl, base_seed + i as u64)
    });
    let mut cells = Vec::with_capacity(grid.len());
    for (gi, &(b, l)) in grid.iter().enumerate() {
        let mut ok = Vec::new();
        let mut errors = Vec::new();
        for r in &results[gi * repeats..(gi + 1) * repeats] {
            match r {
                Ok(rep) => ok.push(rep.clone()),
                Err(e) => {
                    log::warn!("sweep cell batch={b} latent={l}: {e}");
                    errors.push(e.to_string());
                }
            }
        }
        cells.push(SweepCell {
            batch_size: b,
            latent_size: l,
            aggregate: if ok.is_empty() { None } else { Some(aggregate(&ok)?) },
            errors,
        });
    }
    Ok(cells)
}

const METRIC_COLUMNS: &str = "runs,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,weighted_f1_mean,weighted_f1_std";

fn metric_cells(agg: Option<&AggregateReport>) -> String {
    match agg {
        None => ",,,,,,".to_string(),
        Some(a) => {
            let ms = |m: MeanStd| format!("{},{}", m.mean, m.std);
            format!("{},{},{},{}", a.runs, ms(a.accuracy), ms(a.macro_f1), ms(a.weighted_f1))
        }
    }
}

/// `labels_per_class,method,runs,<metric>_mean,<metric>_std...`; failed
/// cells have empty metric columns.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = format!("labels_per_class,method,{METRIC_COLUMNS}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.labels_per_class, r.method.as_str(), metric_cells(r.aggregate.as_ref()));
    }
    s
}

/// `batch_size,latent_size,runs,...`, one row per grid cell.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = format!("batch_size,latent_size,{METRIC_COLUMNS}\n");
    for c in cells {
        let _ = writeln!(s, "{},{},{}", c.batch_size, c.latent_size, metric_cells(c.aggregate.as_ref()));
    }
    s
}

/// One row per run, then `mean` and `std` rows.
pub fn repeats_csv(reports: &[RunReport], agg: &AggregateReport) -> String {
    let mut s = String::from("seed,accuracy,macro_f1,weighted_f1\n");
    for r in reports {
        let _ = writeln!(s, "{},{},{},{}", r.seed, r.accuracy, r.macro_f1, r.weighted_f1);
    }
    let _ = writeln!(s, "mean,{},{},{}", agg.accuracy.mean, agg.macro_f1.mean, agg.weighted_f1.mean);
    let _ = writeln!(s, "std,{},{},{}", agg.accuracy.std, agg.macro_f1.std, agg.weighted_f1.std);
    s
}

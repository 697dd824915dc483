//! Metrics, run reports and the experiment grids.

mod experiments;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use experiments::{
    curve_csv, label_subset, reduced_label_curve, repeats, repeats_csv, run_pipeline, sweep, sweep_csv, CurveRow,
    ExperimentData, Method, PipelineConfig, SweepCell,
};

use crate::data::{Side, WindowedDataset};
use crate::error::{Error, Result};
use crate::model::HarModel;
use crate::tensor::Tensor;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn zeros(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        Self {
            counts: vec![vec![0; c]; c],
            class_names,
        }
    }

    /// Build from raw counts, naming classes by index.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if let Some(r) = counts.iter().find(|r| r.len() != c) {
            return Err(Error::shape("ConfusionMatrix", "row length", c, r.len()));
        }
        Ok(Self {
            counts,
            class_names: (0..c).map(|i| i.to_string()).collect(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Row sum: windows whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    /// Header row of class names, then one row per true class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for n in &self.class_names {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            s.push_str(name);
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(predictions: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    confusion_named(predictions, labels, (0..classes).map(|i| i.to_string()).collect())
}

pub fn confusion_named(predictions: &[usize], labels: &[usize], class_names: Vec<String>) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::shape("confusion", "length", labels.len(), predictions.len()));
    }
    let mut cm = ConfusionMatrix::zeros(class_names);
    let c = cm.num_classes();
    for (&p, &t) in predictions.iter().zip(labels) {
        if let Some(&bad) = [p, t].iter().find(|&&v| v >= c) {
            return Err(Error::Label {
                label: bad as i64,
                classes: c,
            });
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub per_class_f1: Vec<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, macro F1 over classes with support, and support-weighted F1.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyAxis { op: "metrics" });
    }
    let c = cm.num_classes();
    let mut per_class = Vec::with_capacity(c);
    let (mut macro_sum, mut present, mut weighted) = (0.0, 0usize, 0.0);
    for k in 0..c {
        let tp = cm.counts[k][k];
        let support = cm.support(k);
        let p = ratio(tp, cm.predicted(k));
        let r = ratio(tp, support);
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        per_class.push(f1);
        if support > 0 {
            macro_sum += f1;
            present += 1;
            weighted += support as f64 * f1;
        }
    }
    Ok(Metrics {
        accuracy: ratio(cm.trace(), total),
        macro_f1: macro_sum / present as f64,
        weighted_f1: weighted / total as f64,
        per_class_f1: per_class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub seed: u64,
    pub side: Side,
    /// Labeled windows scored.
    pub evaluated: usize,
    /// Unlabeled windows ignored.
    pub skipped_unlabeled: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best_epoch: Option<usize>,
    pub config: Value,
}

impl RunReport {
    pub fn from_confusion(cm: ConfusionMatrix, seed: u64, side: Side) -> Result<Self> {
        let m = metrics(&cm)?;
        Ok(Self {
            accuracy: m.accuracy,
            macro_f1: m.macro_f1,
            weighted_f1: m.weighted_f1,
            per_class_f1: m.per_class_f1,
            evaluated: cm.total() as usize,
            confusion: cm,
            seed,
            side,
            skipped_unlabeled: 0,
            best_epoch: None,
            config: Value::Null,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyAxis { op: "aggregate" });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
    pub weighted_f1: MeanStd,
}

pub fn aggregate(reports: &[RunReport]) -> Result<AggregateReport> {
    let col = |f: fn(&RunReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(AggregateReport {
        runs: reports.len(),
        accuracy: col(|r| r.accuracy)?,
        macro_f1: col(|r| r.macro_f1)?,
        weighted_f1: col(|r| r.weighted_f1)?,
    })
}

/// Anything that maps a `[B, 3, T]` batch to `[B, C]` logits.
pub trait WindowClassifier {
    fn num_classes(&self) -> usize;
    fn logits(&self, batch: &Tensor) -> Result<Tensor>;
}

impl WindowClassifier for HarModel {
    fn num_classes(&self) -> usize {
        self.classifier.num_classes()
    }

    fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        HarModel::logits(self, batch)
    }
}

const EVAL_BATCH: usize = 256;

/// Score one side's labeled windows; the other side is never read.
pub fn evaluate(model: &impl WindowClassifier, dataset: &WindowedDataset, side: Side, seed: u64) -> Result<RunReport> {
    let c = dataset.num_classes();
    if model.num_classes() != c {
        return Err(Error::Config(format!(
            "model predicts {} classes, dataset has {c}",
            model.num_classes()
        )));
    }
    let labeled: Vec<_> = dataset.pairs.iter().filter(|p| p.is_labeled()).collect();
    let skipped = dataset.len() - labeled.len();
    if skipped > 0 {
        log::warn!("evaluate: ignoring {skipped} unlabeled windows");
    }
    if labeled.is_empty() {
        return Err(Error::Data("no labeled windows to evaluate".into()));
    }
    let mut predictions = Vec::with_capacity(labeled.len());
    for chunk in labeled.chunks(EVAL_BATCH) {
        let windows: Vec<&Tensor> = chunk.iter().map(|p| p.side(side)).collect();
        let logits = model.logits(&Tensor::stack(&windows)?)?;
        if logits.shape() != [chunk.len(), c] {
            return Err(Error::shape("evaluate", "logits", format!("[{}, {c}]", chunk.len()), format!("{:?}", logits.shape())));
        }
        predictions.extend(logits.data().chunks(c).map(argmax));
    }
    let labels: Vec<usize> = labeled.iter().map(|p| p.label as usize).collect();
    let cm = confusion_named(&predictions, &labels, dataset.class_names.clone())?;
    let mut report = RunReport::from_confusion(cm, seed, side)?;
    report.skipped_unlabeled = skipped;
    Ok(report)
}

/// Index of the first maximum.
fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_class_example() {
        let cm = ConfusionMatrix::from_counts(vec![vec![2, 1], vec![0, 3]]).unwrap();
        let m = metrics(&cm).unwrap();
        assert!((m.accuracy - 5.0 / 6.0).abs() < 1e-12);
        assert!((m.per_class_f1[0] - 0.8).abs() < 1e-12);
        assert!((m.per_class_f1[1] - 6.0 / 7.0).abs() < 1e-12);
        assert!((m.macro_f1 - 0.828_571_428_571).abs() < 1e-9);
        assert!((m.weighted_f1 - m.macro_f1).abs() < 1e-12);
    }

    #[test]
    fn zero_support_class_excluded_from_macro() {
        let cm = ConfusionMatrix::from_counts(vec![vec![4, 0, 0], vec![0, 0, 0], vec![0, 0, 0]]).unwrap();
        let m = metrics(&cm).unwrap();
        assert_eq!((m.accuracy, m.macro_f1, m.weighted_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_matrix_rejected() {
        assert!(metrics(&ConfusionMatrix::zeros(vec!["a".into()])).is_err());
    }

    #[test]
    fn confusion_layout() {
        let cm = confusion(&[0, 0, 0], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![1, 0, 0], vec![1, 0, 0]]);
        assert!(confusion(&[3], &[0], 3).is_err());
        assert!(confusion(&[0], &[0, 1], 3).is_err());
        assert_eq!(cm.to_csv(), "true\\predicted,0,1,2\n0,1,0,0\n1,1,0,0\n2,1,0,0\n");
    }

    #[test]
    fn aggregate_examples() {
        let rep = |v: f64| {
            let mut r = RunReport::from_confusion(ConfusionMatrix::from_counts(vec![vec![1]]).unwrap(), 0, Side::Left).unwrap();
            r.accuracy = v;
            r
        };
        let a = aggregate(&[rep(0.8), rep(0.9)]).unwrap();
        assert!((a.accuracy.mean - 0.85).abs() < 1e-12);
        assert!((a.accuracy.std - 0.05).abs() < 1e-12);
        let b = aggregate(&[rep(0.9), rep(0.9)]).unwrap();
        assert_eq!(b.accuracy.std, 0.0);
        assert_eq!(aggregate(&[rep(0.7)]).unwrap().accuracy, MeanStd { mean: 0.7, std: 0.0 });
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn argmax_takes_first_maximum() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}

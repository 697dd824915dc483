//! Supervised training of encoder plus classifier, used both for finetuning
//! a pretrained encoder and for the from-scratch baseline.

use serde::{Deserialize, Serialize};

use super::pretrain::layer_vars;
use super::{adam_step, check_finite, AdamHyper, AdamState, LossTrace, TraceSplit};
use crate::data::{InputPolicy, WindowedDataset};
use crate::error::{Error, Result};
use crate::model::{classifier_forward, encoder_forward, ClassifierParams, EncoderParams, HarModel, ParamSet, ACCEL_CHANNELS};
use crate::tensor::{Graph, Tensor, Var};
use crate::Rng;

/// Which encoder layers stay fixed while the classifier trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezePolicy {
    /// conv1 and conv2 frozen, conv3 trainable.
    AllButLast,
    /// Linear probe: the whole encoder is frozen.
    FreezeAll,
    None,
}

impl FreezePolicy {
    pub fn encoder_trainable(self) -> [bool; 3] {
        match self {
            Self::AllButLast => [false, false, true],
            Self::FreezeAll => [false; 3],
            Self::None => [true; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneConfig {
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub freeze_policy: FreezePolicy,
    pub input_policy: InputPolicy,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            epochs: 50,
            patience: 5,
            batch_size: 64,
            seed: 0,
            freeze_policy: FreezePolicy::AllButLast,
            input_policy: InputPolicy::Both,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::param("finetune", "patience must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::param("finetune", "epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("finetune", "batch_size must be >= 1"));
        }
        if !(self.lr >= 0.0) {
            return Err(Error::param("finetune", format!("lr {} must be >= 0", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience-based stopping on a loss that should decrease.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epochs: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Result<Self> {
        if patience == 0 {
            return Err(Error::param("EarlyStopping", "patience must be >= 1"));
        }
        Ok(Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epochs: 0,
            stale: 0,
        })
    }

    /// Record the next epoch's loss. Only a strict decrease counts.
    pub fn observe(&mut self, loss: f64) -> StopDecision {
        self.epochs += 1;
        if loss < self.best {
            self.best = loss;
            self.best_epoch = self.epochs;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::NoImprovement
        }
    }

    /// 1-based epoch of the lowest loss so far (0 before any epoch).
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }

    pub fn epochs_seen(&self) -> usize {
        self.epochs
    }
}

#[derive(Debug, Clone)]
pub struct FinetuneOutput {
    /// Weights from the best validation epoch.
    pub model: HarModel,
    pub trace: LossTrace,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Validation hook: `(epoch, encoder, classifier) -> loss`.
pub type Monitor<'a> = dyn FnMut(usize, &EncoderParams, &ClassifierParams) -> Result<f64> + 'a;

const EVAL_BATCH: usize = 256;

fn check_classes(train: &WindowedDataset, classes: usize) -> Result<()> {
    if train.num_classes() != classes {
        return Err(Error::Config(format!(
            "classifier has {classes} outputs but the data has {} classes",
            train.num_classes()
        )));
    }
    Ok(())
}

/// Mean cross-entropy with dropout disabled.
pub(crate) fn mean_loss(
    encoder: &EncoderParams,
    classifier: &ClassifierParams,
    examples: &[(&Tensor, usize)],
) -> Result<f64> {
    let mut rng = Rng::new(0);
    let mut total = 0.0;
    for chunk in examples.chunks(EVAL_BATCH) {
        let windows: Vec<&Tensor> = chunk.iter().map(|e| e.0).collect();
        let labels: Vec<usize> = chunk.iter().map(|e| e.1).collect();
        let mut g = Graph::new();
        let ev = encoder.bind(&mut g, [false; 3]);
        let cv = classifier.bind(&mut g, false);
        let x = g.constant(Tensor::stack(&windows)?);
        let h = encoder_forward(&mut g, &ev, x, false, &mut rng)?;
        let logits = classifier_forward(&mut g, &cv, h)?;
        let loss = g.softmax_cross_entropy(logits, &labels)?;
        total += f64::from(g.value(loss).data()[0]) * chunk.len() as f64;
    }
    Ok(total / examples.len() as f64)
}

fn fit(
    mut encoder: EncoderParams,
    mut classifier: ClassifierParams,
    train: &WindowedDataset,
    validation: &WindowedDataset,
    cfg: &FinetuneConfig,
    trainable: [bool; 3],
    policy: InputPolicy,
    mut monitor: Option<&mut Monitor<'_>>,
) -> Result<FinetuneOutput> {
    cfg.validate()?;
    check_classes(train, classifier.num_classes())?;
    if encoder.in_channels() != ACCEL_CHANNELS {
        return Err(Error::Config(format!(
            "encoder expects {} channels, data has {ACCEL_CHANNELS}",
            encoder.in_channels()
        )));
    }
    let examples = train.examples(policy);
    let counts = train.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!(
            "class {:?} has no labeled training windows",
            train.class_names[c]
        )));
    }
    let val_examples = validation.examples(policy);
    if val_examples.is_empty() && monitor.is_none() {
        return Err(Error::Config("validation set has no labeled windows".into()));
    }

    let mut rng = Rng::new(cfg.seed);
    let mut order_rng = rng.fork();
    let mut dropout_rng = rng.fork();
    let mut state = {
        let params: Vec<&mut Tensor> = encoder
            .named_tensors_mut()
            .into_iter()
            .chain(classifier.named_tensors_mut())
            .map(|(_, p)| p)
            .collect();
        AdamState::new(&params)
    };
    let mut stopper = EarlyStopping::new(cfg.patience)?;
    let mut best = (encoder.clone(), classifier.clone());
    let mut trace = LossTrace::default();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut step = 0;

    for epoch in 1..=cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let windows: Vec<&Tensor> = batch.iter().map(|&i| examples[i].0).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| examples[i].1).collect();
            let mut g = Graph::new();
            let ev = encoder.bind(&mut g, trainable);
            let cv = classifier.bind(&mut g, true);
            let x = g.constant(Tensor::stack(&windows)?);
            let h = encoder_forward(&mut g, &ev, x, true, &mut dropout_rng)?;
            let logits = classifier_forward(&mut g, &cv, h)?;
            let loss = g.softmax_cross_entropy(logits, &labels)?;
            let value = f64::from(g.value(loss).data()[0]);
            check_finite(value, epoch, step + 1)?;
            g.backward(loss)?;

            let vars: Vec<Var> = layer_vars(&ev.layers).into_iter().chain(layer_vars(&cv.layers)).collect();
            let grads: Vec<Option<Tensor>> = vars.iter().map(|&v| g.take_grad(v)).collect();
            let grads: Vec<Option<&Tensor>> = grads.iter().map(Option::as_ref).collect();
            let mut params: Vec<&mut Tensor> = encoder
                .named_tensors_mut()
                .into_iter()
                .chain(classifier.named_tensors_mut())
                .map(|(_, p)| p)
                .collect();
            step += 1;
            adam_step(&mut params, &grads, &mut state, cfg.lr, AdamHyper::default(), step as u64)?;
            sum += value * batch.len() as f64;
            trace.push(step, epoch, TraceSplit::Train, value);
        }
        trace.push(step, epoch, TraceSplit::TrainEpoch, sum / examples.len() as f64);

        let val = match monitor.as_mut() {
            Some(m) => m(epoch, &encoder, &classifier)?,
            None => mean_loss(&encoder, &classifier, &val_examples)?,
        };
        check_finite(val, epoch, step)?;
        trace.push(step, epoch, TraceSplit::Validation, val);
        log::debug!("finetune epoch {epoch}: validation loss {val:.5}");
        match stopper.observe(val) {
            StopDecision::Improved => best = (encoder.clone(), classifier.clone()),
            StopDecision::NoImprovement => {}
            StopDecision::Stop => break,
        }
    }
    let (encoder, classifier) = best;
    Ok(FinetuneOutput {
        model: HarModel { encoder, classifier },
        trace,
        best_epoch: stopper.best_epoch(),
        epochs_run: stopper.epochs_seen(),
    })
}

/// Train `classifier` on top of a pretrained `encoder` with the configured
/// freeze policy, keeping the weights of the best validation epoch.
pub fn finetune(
    encoder: EncoderParams,
    classifier: ClassifierParams,
    train: &WindowedDataset,
    validation: &WindowedDataset,
    cfg: &FinetuneConfig,
) -> Result<FinetuneOutput> {
    let trainable = cfg.freeze_policy.encoder_trainable();
    fit(encoder, classifier, train, validation, cfg, trainable, cfg.input_policy, None)
}

/// [`finetune`] with the validation loss supplied by `monitor`.
pub fn finetune_with_monitor(
    encoder: EncoderParams,
    classifier: ClassifierParams,
    train: &WindowedDataset,
    validation: &WindowedDataset,
    cfg: &FinetuneConfig,
    monitor: &mut Monitor<'_>,
) -> Result<FinetuneOutput> {
    let trainable = cfg.freeze_policy.encoder_trainable();
    fit(encoder, classifier, train, validation, cfg, trainable, cfg.input_policy, Some(monitor))
}

/// Fresh encoder and classifier trained end to end. The freeze policy in
/// `cfg` is ignored.
pub fn train_supervised(
    train: &WindowedDataset,
    validation: &WindowedDataset,
    cfg: &FinetuneConfig,
    policy: InputPolicy,
    dropout: f64,
) -> Result<FinetuneOutput> {
    let mut rng = Rng::new(cfg.seed);
    let encoder = EncoderParams::init(ACCEL_CHANNELS, dropout, &mut rng);
    let classifier = ClassifierParams::init(train.num_classes(), &mut rng);
    fit(encoder, classifier, train, validation, cfg, [true; 3], policy, None)
}

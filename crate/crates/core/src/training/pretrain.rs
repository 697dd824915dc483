//! Contrastive pretraining: left-right pairs and the rotation baseline.

use serde::{Deserialize, Serialize};

use super::{check_finite, cosine_lr, LossTrace, Sgd, TraceSplit};
use crate::contrastive::{apply_rotation, random_rotation, RotationMatrix};
use crate::data::{Side, WindowPair, WindowedDataset};
use crate::error::{Error, Result};
use crate::model::{encoder_forward, head_forward, EncoderParams, HeadParams, ParamSet};
use crate::tensor::{Graph, Tensor, Var};
use crate::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub batch_size: usize,
    pub temperature: f64,
    pub base_lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Heavy-ball momentum; 0 is plain SGD.
    pub momentum: f64,
    /// Stream used by the rotation baseline.
    pub simclr_side: Side,
    /// Use the identity for both rotation views (test hook).
    pub identity_rotations: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            temperature: 0.05,
            base_lr: 0.004,
            epochs: 200,
            seed: 0,
            momentum: 0.0,
            simclr_side: Side::Left,
            identity_rotations: false,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::param(
                "pretrain",
                format!("batch_size {} gives no negatives; need >= 2", self.batch_size),
            ));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::param("pretrain", format!("temperature {} must be > 0", self.temperature)));
        }
        if self.epochs == 0 {
            return Err(Error::param("pretrain", "epochs must be >= 1"));
        }
        if !(self.base_lr >= 0.0) {
            return Err(Error::param("pretrain", format!("base_lr {} must be >= 0", self.base_lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutput {
    pub encoder: EncoderParams,
    pub head: HeadParams,
    pub trace: LossTrace,
}

pub(crate) fn layer_vars(layers: &[crate::model::LayerVars]) -> Vec<Var> {
    layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
}

/// Shared loop. `views` appends the two `[3, T]` views of one pair to `buf`.
fn run(
    ds: &WindowedDataset,
    mut encoder: EncoderParams,
    mut head: HeadParams,
    cfg: &PretrainConfig,
    views: impl Fn(&WindowPair, &mut Rng, &mut Vec<f32>) -> Result<()>,
) -> Result<PretrainOutput> {
    cfg.validate()?;
    let n = cfg.batch_size;
    if ds.len() < n {
        return Err(Error::Data(format!(
            "dataset has {} windows, fewer than one batch of {n}",
            ds.len()
        )));
    }
    let per_epoch = ds.len() / n;
    let total = per_epoch * cfg.epochs;
    let t = ds.window_len;

    let mut root = Rng::new(cfg.seed);
    let mut order_rng = root.fork();
    let mut dropout_rng = root.fork();
    let mut aug_rng = root.fork();
    let mut opt = Sgd::new(cfg.momentum)?;
    let mut trace = LossTrace::default();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut step = 0;

    for epoch in 1..=cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut epoch_sum = 0.0;
        for batch in order.chunks_exact(n) {
            let mut buf = Vec::with_capacity(2 * n * 3 * t);
            for &i in batch {
                views(&ds.pairs[i], &mut aug_rng, &mut buf)?;
            }
            let x = Tensor::new([2 * n, 3, t], buf)?;

            let mut g = Graph::new();
            let ev = encoder.bind(&mut g, [true; 3]);
            let hv = head.bind(&mut g, true);
            let xv = g.constant(x);
            let h = encoder_forward(&mut g, &ev, xv, true, &mut dropout_rng)?;
            let z = head_forward(&mut g, &hv, h)?;
            let loss = g.nt_xent(z, cfg.temperature)?;
            let value = f64::from(g.value(loss).data()[0]);
            check_finite(value, epoch, step + 1)?;
            g.backward(loss)?;

            let vars: Vec<Var> = layer_vars(&ev.layers).into_iter().chain(layer_vars(&hv.layers)).collect();
            let grads: Vec<Option<Tensor>> = vars.iter().map(|&v| g.take_grad(v)).collect();
            let grads: Vec<Option<&Tensor>> = grads.iter().map(Option::as_ref).collect();
            let lr = cosine_lr(step, total, cfg.base_lr)?;
            let mut params: Vec<&mut Tensor> = encoder
                .named_tensors_mut()
                .into_iter()
                .chain(head.named_tensors_mut())
                .map(|(_, p)| p)
                .collect();
            opt.step(&mut params, &grads, lr)?;

            step += 1;
            epoch_sum += value;
            trace.push(step, epoch, TraceSplit::Train, value);
        }
        let mean = epoch_sum / per_epoch as f64;
        trace.push(step, epoch, TraceSplit::TrainEpoch, mean);
        log::debug!("pretrain epoch {epoch}/{}: loss {mean:.5}", cfg.epochs);
    }
    Ok(PretrainOutput { encoder, head, trace })
}

/// Pretrain with time-synchronised left/right windows as positive pairs.
/// Labels are ignored.
pub fn pretrain_lr_ssl(
    ds: &WindowedDataset,
    encoder: EncoderParams,
    head: HeadParams,
    cfg: &PretrainConfig,
) -> Result<PretrainOutput> {
    run(ds, encoder, head, cfg, |p, _, buf| {
        buf.extend_from_slice(p.left.data());
        buf.extend_from_slice(p.right.data());
        Ok(())
    })
}

/// Rotation baseline: two independently rotated copies of one side's
/// window form the positive pair.
pub fn pretrain_simclr(
    ds: &WindowedDataset,
    encoder: EncoderParams,
    head: HeadParams,
    cfg: &PretrainConfig,
) -> Result<PretrainOutput> {
    run(ds, encoder, head, cfg, |p, rng, buf| {
        let x = p.side(cfg.simclr_side);
        let (r1, r2) = if cfg.identity_rotations {
            (RotationMatrix::identity(), RotationMatrix::identity())
        } else {
            (random_rotation(rng), random_rotation(rng))
        };
        buf.extend_from_slice(apply_rotation(x, &r1)?.data());
        buf.extend_from_slice(apply_rotation(x, &r2)?.data());
        Ok(())
    })
}

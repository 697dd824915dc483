//! Encoder, projection head and classifier.
//!
//! ```text
//! x [B, 3, T] -> conv(32, k24) -> conv(64, k16) -> conv(96, k8) -> max over time -> h [B, 96]
//! h -> dense 256 -> dense 128 -> dense S -> l2 normalise        (projection head, pretraining only)
//! h -> dense 1024 -> dense C                                    (classifier)
//! ```
//!
//! Every convolution is valid (no padding), stride 1, and followed by relu
//! and dropout.

mod checkpoint;

pub use checkpoint::{Checkpoint, TensorEntry, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{Element, Graph, Tensor, Var};
use crate::Rng;

pub const ENCODER_FILTERS: [usize; 3] = [32, 64, 96];
pub const ENCODER_KERNELS: [usize; 3] = [24, 16, 8];
pub const REPRESENTATION_DIM: usize = 96;
pub const HEAD_HIDDEN: [usize; 2] = [256, 128];
pub const CLASSIFIER_HIDDEN: usize = 1024;
pub const ACCEL_CHANNELS: usize = 3;
pub const DEFAULT_DROPOUT: f64 = 0.1;
pub const DEFAULT_LATENT: usize = 96;

/// Shortest window the three valid convolutions accept.
pub const MIN_WINDOW_LEN: usize = ENCODER_KERNELS[0] + ENCODER_KERNELS[1] + ENCODER_KERNELS[2] - 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dParams<F: Element = f32> {
    /// `[c_out, c_in, k]`
    pub weight: Tensor<F>,
    /// `[c_out]`
    pub bias: Tensor<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<F: Element = f32> {
    /// `[d_out, d_in]`
    pub weight: Tensor<F>,
    /// `[d_out]`
    pub bias: Tensor<F>,
}

/// He-uniform: `U(-a, a)` with `a = sqrt(6 / fan_in)`.
fn he_uniform<F: Element>(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor<F> {
    let a = (6.0 / fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| F::of(rng.uniform_range(-a, a))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and data agree")
}

impl<F: Element> Conv1dParams<F> {
    pub fn init(c_out: usize, c_in: usize, kernel: usize, rng: &mut Rng) -> Self {
        Self {
            weight: he_uniform(&[c_out, c_in, kernel], c_in * kernel, rng),
            bias: Tensor::zeros([c_out]),
        }
    }

    pub fn zeros(c_out: usize, c_in: usize, kernel: usize) -> Self {
        Self {
            weight: Tensor::zeros([c_out, c_in, kernel]),
            bias: Tensor::zeros([c_out]),
        }
    }

    fn cast<G: Element>(&self) -> Conv1dParams<G> {
        Conv1dParams {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

impl<F: Element> DenseParams<F> {
    pub fn init(d_out: usize, d_in: usize, rng: &mut Rng) -> Self {
        Self {
            weight: he_uniform(&[d_out, d_in], d_in, rng),
            bias: Tensor::zeros([d_out]),
        }
    }

    pub fn zeros(d_out: usize, d_in: usize) -> Self {
        Self {
            weight: Tensor::zeros([d_out, d_in]),
            bias: Tensor::zeros([d_out]),
        }
    }

    fn cast<G: Element>(&self) -> DenseParams<G> {
        DenseParams {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }

    fn bind(&self, g: &mut Graph<F>, trainable: bool) -> LayerVars {
        LayerVars {
            weight: g.leaf(self.weight.clone(), trainable),
            bias: g.leaf(self.bias.clone(), trainable),
        }
    }
}

/// Uniform access to a component's named tensors, in a fixed order.
pub trait ParamSet<F: Element = f32> {
    fn named_tensors(&self) -> Vec<(String, &Tensor<F>)>;
    fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)>;

    fn parameter_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.numel()).sum()
    }
}

macro_rules! param_set {
    ($ty:ident { $($field:ident),+ }) => {
        impl<F: Element> ParamSet<F> for $ty<F> {
            fn named_tensors(&self) -> Vec<(String, &Tensor<F>)> {
                vec![$(
                    (concat!(stringify!($field), ".weight").to_string(), &self.$field.weight),
                    (concat!(stringify!($field), ".bias").to_string(), &self.$field.bias),
                )+]
            }

            fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
                vec![$(
                    (concat!(stringify!($field), ".weight").to_string(), &mut self.$field.weight),
                    (concat!(stringify!($field), ".bias").to_string(), &mut self.$field.bias),
                )+]
            }
        }
    };
}

/// Leaves for one layer's weight and bias.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub weight: Var,
    pub bias: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<F: Element = f32> {
    pub conv1: Conv1dParams<F>,
    pub conv2: Conv1dParams<F>,
    pub conv3: Conv1dParams<F>,
    pub dropout_rate: f64,
}

param_set!(EncoderParams { conv1, conv2, conv3 });

#[derive(Debug, Clone, Copy)]
pub struct EncoderVars {
    pub layers: [LayerVars; 3],
    pub dropout_rate: f64,
}

impl<F: Element> EncoderParams<F> {
    pub fn init(in_channels: usize, dropout_rate: f64, rng: &mut Rng) -> Self {
        let [f1, f2, f3] = ENCODER_FILTERS;
        let [k1, k2, k3] = ENCODER_KERNELS;
        Self {
            conv1: Conv1dParams::init(f1, in_channels, k1, rng),
            conv2: Conv1dParams::init(f2, f1, k2, rng),
            conv3: Conv1dParams::init(f3, f2, k3, rng),
            dropout_rate,
        }
    }

    pub fn zeros(in_channels: usize, dropout_rate: f64) -> Self {
        let [f1, f2, f3] = ENCODER_FILTERS;
        let [k1, k2, k3] = ENCODER_KERNELS;
        Self {
            conv1: Conv1dParams::zeros(f1, in_channels, k1),
            conv2: Conv1dParams::zeros(f2, f1, k2),
            conv3: Conv1dParams::zeros(f3, f2, k3),
            dropout_rate,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.conv1.weight.shape()[1]
    }

    pub fn cast<G: Element>(&self) -> EncoderParams<G> {
        EncoderParams {
            conv1: self.conv1.cast(),
            conv2: self.conv2.cast(),
            conv3: self.conv3.cast(),
            dropout_rate: self.dropout_rate,
        }
    }

    /// Record the weights on `g`; `trainable[i]` controls conv layer `i + 1`.
    pub fn bind(&self, g: &mut Graph<F>, trainable: [bool; 3]) -> EncoderVars {
        let layers = [&self.conv1, &self.conv2, &self.conv3];
        EncoderVars {
            layers: std::array::from_fn(|i| LayerVars {
                weight: g.leaf(layers[i].weight.clone(), trainable[i]),
                bias: g.leaf(layers[i].bias.clone(), trainable[i]),
            }),
            dropout_rate: self.dropout_rate,
        }
    }

    /// Inference-mode representation `h` of a `[B, C, T]` or `[C, T]` batch.
    pub fn forward(&self, x: &Tensor<F>, training: bool, rng: &mut Rng) -> Result<Tensor<F>> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, [false; 3]);
        let xv = g.constant(x.clone());
        let h = encoder_forward(&mut g, &vars, xv, training, rng)?;
        Ok(g.value(h).clone())
    }
}

/// Three conv/relu/dropout blocks followed by a global max over time.
pub fn encoder_forward<F: Element>(
    g: &mut Graph<F>,
    vars: &EncoderVars,
    x: Var,
    training: bool,
    rng: &mut Rng,
) -> Result<Var> {
    let shape = g.value(x).shape();
    let t = *shape.last().unwrap_or(&0);
    if !(2..=3).contains(&shape.len()) {
        return Err(Error::shape("encoder_forward", "input rank", "2 or 3", shape.len()));
    }
    if t < MIN_WINDOW_LEN {
        return Err(Error::shape(
            "encoder_forward",
            "window length",
            format!(">= {MIN_WINDOW_LEN} samples"),
            t,
        ));
    }
    let mut cur = x;
    for layer in &vars.layers {
        cur = g.conv1d(cur, layer.weight, layer.bias)?;
        cur = g.relu(cur);
        cur = g.dropout(cur, vars.dropout_rate, training, rng)?;
    }
    g.max_pool_time(cur)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<F: Element = f32> {
    pub dense1: DenseParams<F>,
    pub dense2: DenseParams<F>,
    pub dense3: DenseParams<F>,
}

param_set!(HeadParams { dense1, dense2, dense3 });

#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    pub layers: [LayerVars; 3],
}

impl<F: Element> HeadParams<F> {
    pub fn init(latent_size: usize, rng: &mut Rng) -> Self {
        let [h1, h2] = HEAD_HIDDEN;
        Self {
            dense1: DenseParams::init(h1, REPRESENTATION_DIM, rng),
            dense2: DenseParams::init(h2, h1, rng),
            dense3: DenseParams::init(latent_size, h2, rng),
        }
    }

    pub fn latent_size(&self) -> usize {
        self.dense3.weight.shape()[0]
    }

    pub fn cast<G: Element>(&self) -> HeadParams<G> {
        HeadParams {
            dense1: self.dense1.cast(),
            dense2: self.dense2.cast(),
            dense3: self.dense3.cast(),
        }
    }

    pub fn bind(&self, g: &mut Graph<F>, trainable: bool) -> HeadVars {
        HeadVars {
            layers: [
                self.dense1.bind(g, trainable),
                self.dense2.bind(g, trainable),
                self.dense3.bind(g, trainable),
            ],
        }
    }

    pub fn forward(&self, h: &Tensor<F>) -> Result<Tensor<F>> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let hv = g.constant(h.clone());
        let z = head_forward(&mut g, &vars, hv)?;
        Ok(g.value(z).clone())
    }
}

fn check_repr_width<F: Element>(op: &'static str, g: &Graph<F>, h: Var) -> Result<()> {
    let w = *g.value(h).shape().last().unwrap_or(&0);
    if w != REPRESENTATION_DIM {
        return Err(Error::shape(op, "representation width", REPRESENTATION_DIM, w));
    }
    Ok(())
}

/// dense -> relu -> dense -> relu -> dense -> row-wise l2 normalisation.
pub fn head_forward<F: Element>(g: &mut Graph<F>, vars: &HeadVars, h: Var) -> Result<Var> {
    check_repr_width("head_forward", g, h)?;
    let [l1, l2, l3] = vars.layers;
    let a = g.dense(h, l1.weight, l1.bias)?;
    let a = g.relu(a);
    let a = g.dense(a, l2.weight, l2.bias)?;
    let a = g.relu(a);
    let z = g.dense(a, l3.weight, l3.bias)?;
    g.l2_normalize(z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams<F: Element = f32> {
    pub dense1: DenseParams<F>,
    pub dense2: DenseParams<F>,
}

param_set!(ClassifierParams { dense1, dense2 });

#[derive(Debug, Clone, Copy)]
pub struct ClassifierVars {
    pub layers: [LayerVars; 2],
}

impl<F: Element> ClassifierParams<F> {
    pub fn init(num_classes: usize, rng: &mut Rng) -> Self {
        Self {
            dense1: DenseParams::init(CLASSIFIER_HIDDEN, REPRESENTATION_DIM, rng),
            dense2: DenseParams::init(num_classes, CLASSIFIER_HIDDEN, rng),
        }
    }

    pub fn zeros(num_classes: usize) -> Self {
        Self {
            dense1: DenseParams::zeros(CLASSIFIER_HIDDEN, REPRESENTATION_DIM),
            dense2: DenseParams::zeros(num_classes, CLASSIFIER_HIDDEN),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.dense2.weight.shape()[0]
    }

    pub fn bind(&self, g: &mut Graph<F>, trainable: bool) -> ClassifierVars {
        ClassifierVars {
            layers: [self.dense1.bind(g, trainable), self.dense2.bind(g, trainable)],
        }
    }

    pub fn forward(&self, h: &Tensor<F>) -> Result<Tensor<F>> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let hv = g.constant(h.clone());
        let logits = classifier_forward(&mut g, &vars, hv)?;
        Ok(g.value(logits).clone())
    }
}

/// dense -> relu -> dense, returning raw logits.
pub fn classifier_forward<F: Element>(g: &mut Graph<F>, vars: &ClassifierVars, h: Var) -> Result<Var> {
    check_repr_width("classifier_forward", g, h)?;
    let [l1, l2] = vars.layers;
    let a = g.dense(h, l1.weight, l1.bias)?;
    let a = g.relu(a);
    g.dense(a, l2.weight, l2.bias)
}

/// Encoder plus classifier: everything needed at inference time.
#[derive(Debug, Clone, PartialEq)]
pub struct HarModel {
    pub encoder: EncoderParams,
    pub classifier: ClassifierParams,
}

impl HarModel {
    /// Logits for a `[B, C, T]` batch with dropout disabled.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut rng = Rng::new(0);
        let h = self.encoder.forward(x, false, &mut rng)?;
        self.classifier.forward(&h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCount {
    pub component: &'static str,
    pub layer: String,
    pub count: usize,
}

/// Per-layer and per-component parameter counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParameterTable {
    pub layers: Vec<LayerCount>,
}

/// Parameter count reported for encoder + classifier alongside the
/// architecture; it cannot be reproduced from the layer sizes above.
pub const PUBLISHED_ENCODER_CLASSIFIER_PARAMS: usize = 146_000;

impl ParameterTable {
    pub fn component(&self, name: &str) -> usize {
        self.layers.iter().filter(|l| l.component == name).map(|l| l.count).sum()
    }

    pub fn total(&self) -> usize {
        self.layers.iter().map(|l| l.count).sum()
    }
}

impl fmt::Display for ParameterTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:<8} {:>10}", "component", "layer", "params")?;
        for l in &self.layers {
            writeln!(f, "{:<12} {:<8} {:>10}", l.component, l.layer, l.count)?;
        }
        let mut components: Vec<&str> = self.layers.iter().map(|l| l.component).collect();
        components.dedup();
        for c in &components {
            writeln!(f, "{:<12} {:<8} {:>10}", c, "total", self.component(c))?;
        }
        let enc_cls = self.component("encoder") + self.component("classifier");
        if self.component("encoder") > 0 && self.component("classifier") > 0 {
            writeln!(
                f,
                "note: encoder + classifier = {enc_cls}; the published ~{}k figure for this \
                 architecture is not reproducible from the stated layer sizes",
                PUBLISHED_ENCODER_CLASSIFIER_PARAMS / 1000
            )?;
        }
        Ok(())
    }
}

fn layer_counts<F: Element>(component: &'static str, set: &dyn ParamSet<F>, out: &mut Vec<LayerCount>) {
    let mut per_layer: Vec<(String, usize)> = Vec::new();
    for (name, t) in set.named_tensors() {
        let layer = name.split('.').next().unwrap_or("").to_string();
        match per_layer.last_mut() {
            Some((l, c)) if *l == layer => *c += t.numel(),
            _ => per_layer.push((layer, t.numel())),
        }
    }
    out.extend(per_layer.into_iter().map(|(layer, count)| LayerCount {
        component,
        layer,
        count,
    }));
}

/// Exact counts for whichever components are supplied.
pub fn count_parameters<F: Element>(
    encoder: Option<&EncoderParams<F>>,
    head: Option<&HeadParams<F>>,
    classifier: Option<&ClassifierParams<F>>,
) -> ParameterTable {
    let mut layers = Vec::new();
    if let Some(e) = encoder {
        layer_counts("encoder", e, &mut layers);
    }
    if let Some(h) = head {
        layer_counts("head", h, &mut layers);
    }
    if let Some(c) = classifier {
        layer_counts("classifier", c, &mut layers);
    }
    ParameterTable { layers }
}

use super::kernels::{self, ConvDims};
use super::{Element, Tensor};
use crate::contrastive;
use crate::error::{Error, Result};
use crate::Rng;

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<F> {
    Leaf,
    Conv1d {
        input: Var,
        weight: Var,
        bias: Var,
        dims: ConvDims,
        cols: Vec<F>,
    },
    Relu {
        input: Var,
    },
    Dropout {
        input: Var,
        mask: Vec<F>,
    },
    MaxPoolTime {
        input: Var,
        argmax: Vec<usize>,
        t: usize,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
        batch: usize,
    },
    L2Normalize {
        input: Var,
        norms: Vec<F>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        probs: Vec<F>,
        labels: Vec<usize>,
    },
    NtXent {
        input: Var,
        grad: Vec<F>,
    },
    Interleave {
        left: Var,
        right: Var,
    },
    WeightedSum {
        input: Var,
        weights: Vec<F>,
    },
}

struct Node<F> {
    value: Tensor<F>,
    requires_grad: bool,
    grad: Option<Tensor<F>>,
    op: Op<F>,
}

/// Tape of tensor operations supporting one reverse sweep.
///
/// Nodes are appended in evaluation order, so every node's inputs have a
/// smaller index and a single reverse pass visits them after all consumers.
/// A node requires a gradient when it is a trainable leaf or when any of its
/// inputs does; branches without trainable ancestors are skipped in
/// [`Graph::backward`].
pub struct Graph<F: Element = f32> {
    nodes: Vec<Node<F>>,
}

impl<F: Element> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Element> Graph<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<F>, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    /// Leaf that never receives a gradient (inputs, frozen weights).
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient accumulated by the last [`Graph::backward`] call.
    pub fn grad(&self, v: Var) -> Option<&Tensor<F>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor<F>> {
        self.nodes[v.0].grad.take()
    }

    fn push(&mut self, value: Tensor<F>, requires_grad: bool, op: Op<F>) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Valid, stride-1 convolution over time. Input `[C_in, T]` or
    /// `[B, C_in, T]`, weights `[C_out, C_in, K]`, bias `[C_out]`.
    pub fn conv1d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        let ws = self.value(weight).shape().to_vec();
        let bs = self.value(bias).shape().to_vec();
        let (batch, c_in, t_in, batched) = match xs[..] {
            [c, t] => (1, c, t, false),
            [b, c, t] => (b, c, t, true),
            _ => return Err(Error::shape("conv1d", "input rank", "2 or 3", xs.len())),
        };
        let [c_out, w_in, kernel] = ws[..] else {
            return Err(Error::shape("conv1d", "weight rank", 3, ws.len()));
        };
        if w_in != c_in {
            return Err(Error::shape("conv1d", "input channels", w_in, c_in));
        }
        if bs != [c_out] {
            return Err(Error::shape("conv1d", "bias length", c_out, format!("{bs:?}")));
        }
        if t_in < kernel {
            return Err(Error::shape(
                "conv1d",
                "time length",
                format!(">= kernel size {kernel}"),
                t_in,
            ));
        }
        let dims = ConvDims {
            batch,
            c_in,
            t_in,
            c_out,
            kernel,
        };
        let (out, cols) = kernels::conv1d_forward(
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
            &dims,
        );
        let shape = if batched {
            vec![batch, c_out, dims.t_out()]
        } else {
            vec![c_out, dims.t_out()]
        };
        let rg = self.any_grad(&[input, weight, bias]);
        let cols = if rg { cols } else { Vec::new() };
        Ok(self.push(
            Tensor::new(shape, out)?,
            rg,
            Op::Conv1d {
                input,
                weight,
                bias,
                dims,
                cols,
            },
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let value = self.value(input).map(|x| if x > F::zero() { x } else { F::zero() });
        let rg = self.any_grad(&[input]);
        self.push(value, rg, Op::Relu { input })
    }

    /// Inverted dropout. With `training == false` or `p == 0` the input handle
    /// is returned unchanged and no randomness is consumed.
    pub fn dropout(&mut self, input: Var, p: f64, training: bool, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::param("dropout", format!("rate {p} outside [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(input);
        }
        let keep = F::of(1.0 / (1.0 - p));
        let x = self.value(input);
        // Drop when a uniform 32-bit word falls below p * 2^32.
        let threshold = (p * 4_294_967_296.0) as u64;
        let mut words = vec![0u32; x.numel()];
        rng.fill_u32(&mut words);
        let mask: Vec<F> = words
            .iter()
            .map(|&w| if u64::from(w) < threshold { F::zero() } else { keep })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(value, rg, Op::Dropout { input, mask }))
    }

    /// Global max over the trailing time axis: `[C, T] -> [C]`,
    /// `[B, C, T] -> [B, C]`.
    pub fn max_pool_time(&mut self, input: Var) -> Result<Var> {
        let shape = self.value(input).shape().to_vec();
        let Some((&t, lead)) = shape.split_last() else {
            return Err(Error::EmptyAxis { op: "max_pool_time" });
        };
        if lead.is_empty() {
            return Err(Error::shape("max_pool_time", "input rank", "2 or 3", 1));
        }
        let rows: usize = lead.iter().product();
        let (out, argmax) = kernels::max_pool_last(self.value(input).data(), rows, t);
        let rg = self.any_grad(&[input]);
        Ok(self.push(
            Tensor::new(lead.to_vec(), out)?,
            rg,
            Op::MaxPoolTime { input, argmax, t },
        ))
    }

    /// Affine layer. Input `[D_in]` or `[B, D_in]`, weights `[D_out, D_in]`.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        let ws = self.value(weight).shape().to_vec();
        let (batch, d_in, batched) = match xs[..] {
            [d] => (1, d, false),
            [b, d] => (b, d, true),
            _ => return Err(Error::shape("dense", "input rank", "1 or 2", xs.len())),
        };
        let [d_out, w_in] = ws[..] else {
            return Err(Error::shape("dense", "weight rank", 2, ws.len()));
        };
        if w_in != d_in {
            return Err(Error::shape("dense", "input width", w_in, d_in));
        }
        if self.value(bias).shape() != [d_out] {
            return Err(Error::shape(
                "dense",
                "bias length",
                d_out,
                format!("{:?}", self.value(bias).shape()),
            ));
        }
        let out = kernels::dense_forward(
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
            batch,
            d_in,
            d_out,
        );
        let shape = if batched { vec![batch, d_out] } else { vec![d_out] };
        let rg = self.any_grad(&[input, weight, bias]);
        Ok(self.push(
            Tensor::new(shape, out)?,
            rg,
            Op::Dense {
                input,
                weight,
                bias,
                batch,
            },
        ))
    }

    /// Divide each row (the whole vector for rank 1) by its Euclidean norm.
    pub fn l2_normalize(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let width = *x.shape().last().expect("tensor rank >= 1");
        let mut norms = Vec::with_capacity(x.numel() / width);
        let mut data = Vec::with_capacity(x.numel());
        for (row_idx, row) in x.data().chunks(width).enumerate() {
            let norm = row.iter().map(|&v| v * v).sum::<F>().sqrt();
            if norm.as_f64() <= 1e-12 {
                return Err(Error::DegenerateVector {
                    op: "l2_normalize",
                    row: row_idx,
                    norm: norm.as_f64(),
                });
            }
            data.extend(row.iter().map(|&v| v / norm));
            norms.push(norm);
        }
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(value, rg, Op::L2Normalize { input, norms }))
    }

    /// Mean cross-entropy of `[B, C]` logits against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let x = self.value(logits);
        let [batch, classes] = x.shape()[..] else {
            return Err(Error::shape("softmax_cross_entropy", "logits rank", 2, x.ndim()));
        };
        if labels.len() != batch {
            return Err(Error::shape("softmax_cross_entropy", "label count", batch, labels.len()));
        }
        let mut probs = Vec::with_capacity(batch * classes);
        let mut loss = 0.0f64;
        for (row, &label) in x.data().chunks(classes).zip(labels) {
            if label >= classes {
                return Err(Error::Label {
                    label: label as i64,
                    classes,
                });
            }
            let max = row.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
            let exps: Vec<F> = row.iter().map(|&v| (v - max).exp()).collect();
            let sum: F = exps.iter().copied().sum();
            loss += (sum.ln() + max - row[label]).as_f64();
            probs.extend(exps.iter().map(|&e| e / sum));
        }
        let value = Tensor::scalar(F::of(loss / batch as f64));
        let rg = self.any_grad(&[logits]);
        Ok(self.push(
            value,
            rg,
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Left-right NT-Xent over interleaved embeddings `[2N, S]`.
    pub fn nt_xent(&mut self, input: Var, temperature: f64) -> Result<Var> {
        let (loss, grad) = contrastive::nt_xent_loss(self.value(input), temperature)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(
            Tensor::scalar(loss),
            rg,
            Op::NtXent {
                input,
                grad: grad.into_data(),
            },
        ))
    }

    /// Rows `[l0, r0, l1, r1, ...]` from two `[N, S]` inputs.
    pub fn interleave(&mut self, left: Var, right: Var) -> Result<Var> {
        let value = contrastive::interleave_embeddings(self.value(left), self.value(right))?;
        let rg = self.any_grad(&[left, right]);
        Ok(self.push(value, rg, Op::Interleave { left, right }))
    }

    /// `sum_i weights[i] * x[i]`, used to reduce tensors to a scalar.
    pub fn weighted_sum(&mut self, input: Var, weights: &[F]) -> Result<Var> {
        let x = self.value(input);
        if weights.len() != x.numel() {
            return Err(Error::shape("weighted_sum", "weights", x.numel(), weights.len()));
        }
        let s = x.data().iter().zip(weights).map(|(&a, &w)| a * w).sum::<F>();
        let rg = self.any_grad(&[input]);
        Ok(self.push(
            Tensor::scalar(s),
            rg,
            Op::WeightedSum {
                input,
                weights: weights.to_vec(),
            },
        ))
    }

    /// Reverse sweep from a scalar node. Gradients of earlier calls are
    /// cleared first.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::shape("backward", "loss size", 1, self.value(loss).numel()));
        }
        let mut grads: Vec<Option<Vec<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![F::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let node = &self.nodes[idx];
            let mut sends: Vec<(Var, Vec<F>)> = Vec::new();
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Conv1d {
                    input,
                    weight,
                    bias,
                    dims,
                    cols,
                } => {
                    let need = [
                        self.requires_grad(*input),
                        self.requires_grad(*weight),
                        self.requires_grad(*bias),
                    ];
                    let cg = kernels::conv1d_backward(&g, self.value(*weight).data(), cols, dims, need);
                    sends.extend(cg.input.map(|d| (*input, d)));
                    sends.extend(cg.weight.map(|d| (*weight, d)));
                    sends.extend(cg.bias.map(|d| (*bias, d)));
                }
                Op::Relu { input } => {
                    let x = self.value(*input).data();
                    let d = g
                        .iter()
                        .zip(x)
                        .map(|(&gv, &xv)| if xv > F::zero() { gv } else { F::zero() })
                        .collect();
                    sends.push((*input, d));
                }
                Op::Dropout { input, mask } => {
                    sends.push((*input, g.iter().zip(mask).map(|(&a, &m)| a * m).collect()));
                }
                Op::MaxPoolTime { input, argmax, t } => {
                    let mut d = vec![F::zero(); argmax.len() * t];
                    for (r, (&a, &gv)) in argmax.iter().zip(&g).enumerate() {
                        d[r * t + a] = gv;
                    }
                    sends.push((*input, d));
                }
                Op::Dense {
                    input,
                    weight,
                    bias,
                    batch,
                } => {
                    let w = self.value(*weight);
                    let (d_out, d_in) = (w.shape()[0], w.shape()[1]);
                    let need = [
                        self.requires_grad(*input),
                        self.requires_grad(*weight),
                        self.requires_grad(*bias),
                    ];
                    let dg = kernels::dense_backward(
                        &g,
                        self.value(*input).data(),
                        w.data(),
                        *batch,
                        d_in,
                        d_out,
                        need,
                    );
                    sends.extend(dg.input.map(|d| (*input, d)));
                    sends.extend(dg.weight.map(|d| (*weight, d)));
                    sends.extend(dg.bias.map(|d| (*bias, d)));
                }
                Op::L2Normalize { input, norms } => {
                    let y = node.value.data();
                    let width = y.len() / norms.len();
                    let mut d = Vec::with_capacity(y.len());
                    for ((yr, gr), &n) in y.chunks(width).zip(g.chunks(width)).zip(norms) {
                        let dot: F = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        d.extend(yr.iter().zip(gr).map(|(&yv, &gv)| (gv - yv * dot) / n));
                    }
                    sends.push((*input, d));
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    probs,
                    labels,
                } => {
                    let classes = probs.len() / labels.len();
                    let scale = g[0] / F::of(labels.len() as f64);
                    let mut d: Vec<F> = probs.iter().map(|&p| p * scale).collect();
                    for (i, &l) in labels.iter().enumerate() {
                        d[i * classes + l] = d[i * classes + l] - scale;
                    }
                    sends.push((*logits, d));
                }
                Op::NtXent { input, grad } => {
                    sends.push((*input, grad.iter().map(|&v| v * g[0]).collect()));
                }
                Op::Interleave { left, right } => {
                    let width = node.value.shape()[1];
                    let mut dl = Vec::with_capacity(g.len() / 2);
                    let mut dr = Vec::with_capacity(g.len() / 2);
                    for (k, row) in g.chunks(width).enumerate() {
                        if k % 2 == 0 {
                            dl.extend_from_slice(row);
                        } else {
                            dr.extend_from_slice(row);
                        }
                    }
                    sends.push((*left, dl));
                    sends.push((*right, dr));
                }
                Op::WeightedSum { input, weights } => {
                    sends.push((*input, weights.iter().map(|&w| w * g[0]).collect()));
                }
            }
            for (target, d) in sends {
                if !self.nodes[target.0].requires_grad {
                    continue;
                }
                match &mut grads[target.0] {
                    Some(acc) => acc.iter_mut().zip(&d).for_each(|(a, &b)| *a = *a + b),
                    slot @ None => *slot = Some(d),
                }
            }
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            node.grad = match (g, &node.op) {
                (Some(g), Op::Leaf) => Some(Tensor::new(node.value.shape().to_vec(), g)?),
                _ => None,
            };
        }
        Ok(())
    }

    /// Fingerprint of every piecewise-linear branch taken in the forward pass
    /// (relu signs, pooling argmaxes). Two evaluations with equal signatures
    /// lie on the same smooth piece.
    pub fn branch_signature(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(PRIME);
        };
        for node in &self.nodes {
            match &node.op {
                Op::Relu { input } => {
                    for &x in self.nodes[input.0].value.data() {
                        mix((x > F::zero()) as u64);
                    }
                }
                Op::MaxPoolTime { argmax, .. } => argmax.iter().for_each(|&a| mix(a as u64)),
                _ => {}
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape.to_vec(), v).unwrap()
    }

    #[test]
    fn conv1d_sums_window() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 3], &[1.0, 2.0, 3.0]));
        let w = g.constant(t(&[1, 1, 3], &[1.0, 1.0, 1.0]));
        let b = g.constant(t(&[1], &[0.0]));
        let y = g.conv1d(x, w, b).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1]);
        assert_eq!(g.value(y).data(), &[6.0]);
    }

    #[test]
    fn conv1d_zero_input_gives_bias() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::zeros([2, 9]));
        let w = g.constant(Tensor::full([3, 2, 4], 0.7));
        let b = g.constant(Tensor::from_f64([3], &[1.0, -2.0, 0.5]).unwrap());
        let y = g.conv1d(x, w, b).unwrap();
        assert_eq!(g.value(y).shape(), &[3, 6]);
        for (o, row) in g.value(y).data().chunks(6).enumerate() {
            assert!(row.iter().all(|&v| v == [1.0, -2.0, 0.5][o]));
        }
    }

    #[test]
    fn conv1d_shape_errors_name_dimension() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::zeros([2, 9]));
        let w = g.constant(Tensor::zeros([3, 4, 4]));
        let b = g.constant(Tensor::zeros([3]));
        let err = g.conv1d(x, w, b).unwrap_err().to_string();
        assert!(err.contains("input channels"), "{err}");

        let x = g.constant(Tensor::zeros([4, 3]));
        let err = g.conv1d(x, w, b).unwrap_err().to_string();
        assert!(err.contains("time length"), "{err}");
    }

    #[test]
    fn relu_values() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[3], &[-1.0, 0.0, 2.0]));
        let y = g.relu(x);
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_gradient_is_indicator() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(t(&[4], &[-1.0, 0.0, 2.0, 0.5]), true);
        let y = g.relu(x);
        let s = g.weighted_sum(y, &[1.0; 4]).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = Rng::new(0);
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::full([10], 3.0));
        assert_eq!(g.dropout(x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(g.dropout(x, 0.1, false, &mut rng).unwrap(), x);
        assert!(g.dropout(x, 1.0, true, &mut rng).is_err());
        assert!(g.dropout(x, -0.1, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_preserves_mean() {
        let mut rng = Rng::new(11);
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::full([100_000], 1.0));
        let y = g.dropout(x, 0.1, true, &mut rng).unwrap();
        let mean = g.value(y).data().iter().map(|&v| v as f64).sum::<f64>() / 1e5;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
        let zeros = g.value(y).data().iter().filter(|&&v| v == 0.0).count();
        assert!((9_000..11_000).contains(&zeros));
    }

    #[test]
    fn max_pool_cases() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[2, 3], &[1.0, 5.0, 2.0, 0.0, -1.0, -2.0]));
        let y = g.max_pool_time(x).unwrap();
        assert_eq!(g.value(y).data(), &[5.0, 0.0]);

        let x = g.constant(t(&[1, 4], &[7.0; 4]));
        let y = g.max_pool_time(x).unwrap();
        assert_eq!(g.value(y).data(), &[7.0]);
    }

    #[test]
    fn max_pool_gradient_goes_to_first_max() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(t(&[1, 4], &[1.0, 3.0, 3.0, 2.0]), true);
        let y = g.max_pool_time(x).unwrap();
        let s = g.weighted_sum(y, &[2.0]).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn dense_identity_and_bias() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[2], &[1.5, -2.0]));
        let eye = g.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let zero = g.constant(t(&[2], &[0.0, 0.0]));
        let y = g.dense(x, eye, zero).unwrap();
        assert_eq!(g.value(y).data(), &[1.5, -2.0]);

        let w0 = g.constant(Tensor::zeros([2, 2]));
        let b3 = g.constant(t(&[2], &[3.0, 3.0]));
        let y = g.dense(x, w0, b3).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 3.0]);
    }

    #[test]
    fn l2_normalize_cases() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[2], &[3.0, 4.0]));
        let y = g.l2_normalize(x).unwrap();
        assert_eq!(g.value(y).data(), &[0.6, 0.8]);
        let z = g.constant(t(&[2], &[0.0, 0.0]));
        assert!(matches!(
            g.l2_normalize(z),
            Err(Error::DegenerateVector { .. })
        ));
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::zeros([1, 4]));
        let l = g.softmax_cross_entropy(x, &[2]).unwrap();
        assert!((g.value(l).data()[0] - 4f64.ln()).abs() < 1e-12);

        let x = g.constant(t(&[1, 3], &[0.0, 1000.0, 0.0]));
        let l = g.softmax_cross_entropy(x, &[1]).unwrap();
        assert!(g.value(l).data()[0].abs() < 1e-12);

        assert!(matches!(
            g.softmax_cross_entropy(x, &[3]),
            Err(Error::Label { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn frozen_leaves_get_no_gradient() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 2], &[1.0, 2.0]));
        let w = g.constant(t(&[1, 2], &[0.5, 0.5]));
        let b = g.leaf(t(&[1], &[0.0]), true);
        let y = g.dense(x, w, b).unwrap();
        let s = g.weighted_sum(y, &[1.0]).unwrap();
        g.backward(s).unwrap();
        assert!(g.grad(w).is_none());
        assert_eq!(g.grad(b).unwrap().data(), &[1.0]);
    }
}

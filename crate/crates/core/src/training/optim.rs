//! Plain SGD (optional momentum) and Adam over flat parameter lists.
//!
//! A `None` gradient marks a frozen tensor, which is left untouched.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check_shapes(op: &'static str, params: &[&mut Tensor], grads: &[Option<&Tensor>]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::shape(op, "gradient count", params.len(), grads.len()));
    }
    for (p, g) in params.iter().zip(grads) {
        if let Some(g) = g {
            if p.shape() != g.shape() {
                return Err(Error::shape(op, "gradient shape", format!("{:?}", p.shape()), format!("{:?}", g.shape())));
            }
        }
    }
    Ok(())
}

/// `theta <- theta - lr * g`.
pub fn sgd_step(params: &mut [&mut Tensor], grads: &[Option<&Tensor>], lr: f64) -> Result<()> {
    check_shapes("sgd_step", params, grads)?;
    let lr = lr as f32;
    for (p, g) in params.iter_mut().zip(grads) {
        if let Some(g) = g {
            for (x, &d) in p.data_mut().iter_mut().zip(g.data()) {
                *x -= lr * d;
            }
        }
    }
    Ok(())
}

/// SGD with optional heavy-ball momentum (`v <- mu v + g`, `theta -= lr v`).
#[derive(Debug, Clone, Default)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Vec<Option<Tensor>>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::param("Sgd", format!("momentum {momentum} outside [0, 1)")));
        }
        Ok(Self {
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Option<&Tensor>], lr: f64) -> Result<()> {
        if self.momentum == 0.0 {
            return sgd_step(params, grads, lr);
        }
        check_shapes("sgd_step", params, grads)?;
        if self.velocity.len() != params.len() {
            self.velocity = vec![None; params.len()];
        }
        let mu = self.momentum as f32;
        let mut dirs: Vec<Option<&Tensor>> = Vec::with_capacity(grads.len());
        for (v, g) in self.velocity.iter_mut().zip(grads) {
            match g {
                Some(g) => {
                    let v = v.get_or_insert_with(|| Tensor::zeros(g.shape().to_vec()));
                    for (a, &d) in v.data_mut().iter_mut().zip(g.data()) {
                        *a = mu * *a + d;
                    }
                }
                None => *v = None,
            }
        }
        dirs.extend(self.velocity.iter().map(Option::as_ref));
        sgd_step(params, &dirs, lr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    /// Steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[&mut Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }
}

/// Bias-corrected Adam update at step `t >= 1`.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Option<&Tensor>],
    state: &mut AdamState,
    lr: f64,
    hp: AdamHyper,
    t: u64,
) -> Result<()> {
    if t == 0 {
        return Err(Error::param("adam_step", "t must be >= 1"));
    }
    check_shapes("adam_step", params, grads)?;
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::shape("adam_step", "state length", params.len(), state.m.len()));
    }
    let c1 = 1.0 - hp.beta1.powi(t as i32);
    let c2 = 1.0 - hp.beta2.powi(t as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let Some(g) = g else { continue };
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        if m.shape() != p.shape() || v.shape() != p.shape() {
            return Err(Error::shape("adam_step", "state shape", format!("{:?}", p.shape()), format!("{:?}", m.shape())));
        }
        for (((x, &d), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
            let d = f64::from(d);
            let mn = hp.beta1 * f64::from(*mi) + (1.0 - hp.beta1) * d;
            let vn = hp.beta2 * f64::from(*vi) + (1.0 - hp.beta2) * d * d;
            *mi = mn as f32;
            *vi = vn as f32;
            let update = lr * (mn / c1) / ((vn / c2).sqrt() + hp.eps);
            *x = (f64::from(*x) - update) as f32;
        }
    }
    state.t = t;
    Ok(())
}

use super::{Element, Graph, Tensor, Var};
use crate::error::Result;
use crate::Rng;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference half step. The f32 default is near the cube root
    /// of machine epsilon, which balances rounding against truncation.
    pub step: f64,
    /// Larger inputs are checked on a random subset of this many coordinates.
    pub max_coords_per_input: usize,
    pub seed: u64,
}

impl GradCheckOptions {
    pub fn f32() -> Self {
        Self {
            step: 5e-3,
            max_coords_per_input: 64,
            seed: 0,
        }
    }

    pub fn f64() -> Self {
        Self {
            step: 1e-6,
            ..Self::f32()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_coords(mut self, n: usize) -> Self {
        self.max_coords_per_input = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(|analytic|, |numeric|, 1)`.
    pub max_rel_error: f64,
    /// `(input index, flat coordinate)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Coordinates whose perturbation crossed a relu or pooling branch.
    pub skipped_kinks: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tolerance
    }
}

fn evaluate<F: Element>(
    f: &impl Fn(&mut Graph<F>, &[Var]) -> Result<Var>,
    inputs: &[Tensor<F>],
    weights: &mut Option<Vec<F>>,
    seed: u64,
    track: bool,
) -> Result<(Graph<F>, Vec<Var>, Var, u64)> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), track)).collect();
    let mut out = f(&mut g, &vars)?;
    if g.value(out).numel() != 1 {
        let n = g.value(out).numel();
        let w = weights.get_or_insert_with(|| {
            let mut rng = Rng::new(seed ^ 0x9e37_79b9_7f4a_7c15);
            (0..n).map(|_| F::of(rng.uniform_range(-1.0, 1.0))).collect()
        });
        out = g.weighted_sum(out, w)?;
    }
    let sig = g.branch_signature();
    Ok((g, vars, out, sig))
}

/// Compare reverse-mode gradients of `f` against central finite differences.
///
/// `f` receives one leaf per entry of `inputs`. Non-scalar outputs are
/// reduced with fixed random weights. Coordinates where the perturbed
/// evaluations take a different relu/pooling branch than the base point are
/// skipped and counted, since the function is not differentiable across
/// those boundaries.
pub fn grad_check<F: Element>(
    f: impl Fn(&mut Graph<F>, &[Var]) -> Result<Var>,
    inputs: &[Tensor<F>],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut weights = None;
    let (mut g, vars, out, base_sig) = evaluate(&f, inputs, &mut weights, opts.seed, true)?;
    g.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| match g.grad(v) {
            Some(gr) => gr.data().iter().map(|x| x.as_f64()).collect(),
            None => vec![0.0; t.numel()],
        })
        .collect();
    drop(g);

    let mut rng = Rng::new(opts.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped_kinks: 0,
    };
    let mut work: Vec<Tensor<F>> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let coords = if input.numel() <= opts.max_coords_per_input {
            (0..input.numel()).collect()
        } else {
            rng.sample_indices(input.numel(), opts.max_coords_per_input)
        };
        for c in coords {
            let x0 = input.data()[c];
            let xp = x0 + F::of(opts.step);
            let xm = x0 - F::of(opts.step);
            work[i].data_mut()[c] = xp;
            let (gp, _, op, sp) = evaluate(&f, &work, &mut weights, opts.seed, false)?;
            work[i].data_mut()[c] = xm;
            let (gm, _, om, sm) = evaluate(&f, &work, &mut weights, opts.seed, false)?;
            work[i].data_mut()[c] = x0;
            if sp != base_sig || sm != base_sig {
                report.skipped_kinks += 1;
                continue;
            }
            let fp = gp.value(op).data()[0].as_f64();
            let fm = gm.value(om).data()[0].as_f64();
            let numeric = (fp - fm) / (xp - xm).as_f64();
            let a = analytic[i][c];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel;
                report.worst = Some((i, c));
            }
        }
    }
    Ok(report)
}

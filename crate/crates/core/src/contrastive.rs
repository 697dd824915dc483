//! Left-right contrastive objective and the rotation views used by the
//! SimCLR baseline.
//!
//! Embeddings of a minibatch are interleaved so that rows `2k` and `2k + 1`
//! (zero-based) hold the left and right window of pair `k`. Each row's
//! positive is its partner; the remaining `2N - 2` rows are negatives.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};
use crate::Rng;

fn check_matrix<F: Element>(op: &'static str, t: &Tensor<F>) -> Result<(usize, usize)> {
    match t.shape() {
        &[r, c] => Ok((r, c)),
        s => Err(Error::shape(op, "rank", 2, s.len())),
    }
}

/// `[l0, r0, l1, r1, ...]` from `left: [N, S]` and `right: [N, S]`.
pub fn interleave_embeddings<F: Element>(left: &Tensor<F>, right: &Tensor<F>) -> Result<Tensor<F>> {
    let (n, s) = check_matrix("interleave_embeddings", left)?;
    let (rn, rs) = check_matrix("interleave_embeddings", right)?;
    if n != rn {
        return Err(Error::shape("interleave_embeddings", "pair count", n, rn));
    }
    if s != rs {
        return Err(Error::shape("interleave_embeddings", "embedding width", s, rs));
    }
    let mut data = Vec::with_capacity(2 * n * s);
    for k in 0..n {
        data.extend_from_slice(left.row(k));
        data.extend_from_slice(right.row(k));
    }
    Tensor::new([2 * n, s], data)
}

/// Inverse of [`interleave_embeddings`].
pub fn deinterleave_embeddings<F: Element>(z: &Tensor<F>) -> Result<(Tensor<F>, Tensor<F>)> {
    let (rows, s) = check_matrix("deinterleave_embeddings", z)?;
    if rows % 2 != 0 {
        return Err(Error::shape("deinterleave_embeddings", "row count", "even", rows));
    }
    let mut left = Vec::with_capacity(rows / 2 * s);
    let mut right = Vec::with_capacity(rows / 2 * s);
    for k in 0..rows / 2 {
        left.extend_from_slice(z.row(2 * k));
        right.extend_from_slice(z.row(2 * k + 1));
    }
    Ok((Tensor::new([rows / 2, s], left)?, Tensor::new([rows / 2, s], right)?))
}

/// Pairwise cosine similarities of the rows of an embedding matrix.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix<F = f32> {
    values: Tensor<F>,
}

impl<F: Element> SimilarityMatrix<F> {
    pub fn size(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.values.data()[i * self.size() + j]
    }

    pub fn values(&self) -> &Tensor<F> {
        &self.values
    }
}

fn unit_rows(op: &'static str, z: &[f64], rows: usize, width: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut unit = Vec::with_capacity(rows * width);
    let mut norms = Vec::with_capacity(rows);
    for (i, row) in z.chunks(width).enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return Err(Error::DegenerateVector { op, row: i, norm });
        }
        unit.extend(row.iter().map(|v| v / norm));
        norms.push(norm);
    }
    Ok((unit, norms))
}

fn gram(unit: &[f64], rows: usize, width: usize) -> Vec<f64> {
    let mut sim = vec![0.0; rows * rows];
    for i in 0..rows {
        let ui = &unit[i * width..(i + 1) * width];
        for j in i..rows {
            let uj = &unit[j * width..(j + 1) * width];
            let d: f64 = ui.iter().zip(uj).map(|(a, b)| a * b).sum();
            sim[i * rows + j] = d;
            sim[j * rows + i] = d;
        }
    }
    sim
}

/// `sim[i][j] = <z_i, z_j> / (|z_i| |z_j|)`. Exactly symmetric.
pub fn cosine_similarity_matrix<F: Element>(z: &Tensor<F>) -> Result<SimilarityMatrix<F>> {
    let (rows, width) = check_matrix("cosine_similarity_matrix", z)?;
    let z64: Vec<f64> = z.data().iter().map(|v| v.as_f64()).collect();
    let (unit, _) = unit_rows("cosine_similarity_matrix", &z64, rows, width)?;
    let sim = gram(&unit, rows, width);
    Ok(SimilarityMatrix {
        values: Tensor::new([rows, rows], sim.into_iter().map(F::of).collect())?,
    })
}

/// NT-Xent over interleaved embeddings `z: [2N, S]`.
///
/// For row `i` with partner `p(i)`,
/// `l(i) = -log( exp(sim[i][p]/tau) / sum_{k != i} exp(sim[i][k]/tau) )`
/// and the loss is the mean of `l` over all `2N` rows. Rows are compared by
/// cosine similarity, so inputs need not be pre-normalised. Returns the loss
/// and its gradient with respect to `z`.
pub fn nt_xent_loss<F: Element>(z: &Tensor<F>, temperature: f64) -> Result<(F, Tensor<F>)> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::param("nt_xent_loss", format!("temperature {temperature} must be > 0")));
    }
    let (rows, width) = check_matrix("nt_xent_loss", z)?;
    if rows % 2 != 0 {
        return Err(Error::shape("nt_xent_loss", "row count", "even (2N)", rows));
    }
    let z64: Vec<f64> = z.data().iter().map(|v| v.as_f64()).collect();
    let (unit, norms) = unit_rows("nt_xent_loss", &z64, rows, width)?;
    let sim = gram(&unit, rows, width);

    let scale = 1.0 / rows as f64;
    let mut loss = 0.0;
    // Gradient of the loss with respect to the similarity matrix.
    let mut dsim = vec![0.0; rows * rows];
    for i in 0..rows {
        let partner = i ^ 1;
        let logits = &sim[i * rows..(i + 1) * rows];
        let max = (0..rows)
            .filter(|&k| k != i)
            .map(|k| logits[k] / temperature)
            .fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = (0..rows)
            .filter(|&k| k != i)
            .map(|k| (logits[k] / temperature - max).exp())
            .sum();
        let lse = max + denom.ln();
        loss += lse - logits[partner] / temperature;
        for k in (0..rows).filter(|&k| k != i) {
            let q = (logits[k] / temperature - lse).exp();
            let target = if k == partner { 1.0 } else { 0.0 };
            dsim[i * rows + k] = (q - target) * scale / temperature;
        }
    }
    loss *= scale;

    let mut grad = Vec::with_capacity(rows * width);
    for i in 0..rows {
        let ui = &unit[i * width..(i + 1) * width];
        let mut du = vec![0.0; width];
        for k in 0..rows {
            let c = dsim[i * rows + k] + dsim[k * rows + i];
            if c != 0.0 {
                for (d, &u) in du.iter_mut().zip(&unit[k * width..(k + 1) * width]) {
                    *d += c * u;
                }
            }
        }
        let radial: f64 = ui.iter().zip(&du).map(|(a, b)| a * b).sum();
        grad.extend(
            ui.iter()
                .zip(&du)
                .map(|(&u, &d)| F::of((d - u * radial) / norms[i])),
        );
    }
    Ok((F::of(loss), Tensor::new([rows, width], grad)?))
}

/// Proper rotation of 3-vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rodrigues' formula `R = I + sin(a) K + (1 - cos(a)) K^2` for a unit
    /// axis with cross-product matrix `K`.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return Err(Error::DegenerateVector {
                op: "rotation axis",
                row: 0,
                norm,
            });
        }
        let [x, y, z] = axis.map(|v| v / norm);
        let k = [[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]];
        let (s, c1) = (angle.sin(), 1.0 - angle.cos());
        let mut r = Self::identity().0;
        for i in 0..3 {
            for j in 0..3 {
                let k2: f64 = (0..3).map(|m| k[i][m] * k[m][j]).sum();
                r[i][j] += s * k[i][j] + c1 * k2;
            }
        }
        Ok(RotationMatrix(r))
    }

    pub fn transpose(&self) -> Self {
        let m = self.0;
        RotationMatrix(std::array::from_fn(|i| std::array::from_fn(|j| m[j][i])))
    }

    pub fn matmul(&self, other: &Self) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|m| self.0[i][m] * other.0[m][j]).sum()))
    }

    pub fn determinant(&self) -> f64 {
        let m = self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `R^T R = I` and `det R = 1`, both within `tol`.
    pub fn is_rotation(&self, tol: f64) -> bool {
        let rtr = self.transpose().matmul(self);
        let orthogonal = (0..3).all(|i| (0..3).all(|j| (rtr[i][j] - if i == j { 1.0 } else { 0.0 }).abs() <= tol));
        orthogonal && (self.determinant() - 1.0).abs() <= tol
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| (0..3).map(|j| self.0[i][j] * v[j]).sum())
    }
}

/// Axis drawn as a normalised vector of standard normals, angle uniform in
/// `[0, 2 pi)`.
pub fn random_rotation(rng: &mut Rng) -> RotationMatrix {
    loop {
        let axis = [rng.normal(), rng.normal(), rng.normal()];
        let angle = rng.uniform() * 2.0 * PI;
        if let Ok(r) = RotationMatrix::from_axis_angle(axis, angle) {
            return r;
        }
    }
}

/// Rotate every time step of a `[3, T]` window.
pub fn apply_rotation<F: Element>(window: &Tensor<F>, r: &RotationMatrix) -> Result<Tensor<F>> {
    let &[3, t] = window.shape() else {
        return Err(Error::shape(
            "apply_rotation",
            "channel count",
            3,
            format!("{:?}", window.shape()),
        ));
    };
    let x = window.data();
    let mut out = vec![F::zero(); 3 * t];
    for i in 0..3 {
        let dst = &mut out[i * t..(i + 1) * t];
        let mut first = true;
        for j in 0..3 {
            let c = r.0[i][j];
            // Zero coefficients are skipped so the identity is reproduced bit
            // for bit, including signed zeros.
            if c == 0.0 {
                continue;
            }
            let src = &x[j * t..(j + 1) * t];
            for (d, &s) in dst.iter_mut().zip(src) {
                let term = F::of(c * s.as_f64());
                *d = if first { term } else { *d + term };
            }
            first = false;
        }
    }
    Tensor::new([3, t], out)
}

//! Slice-level forward and backward kernels.
//!
//! Convolution is lowered to a single GEMM per call through an im2col buffer
//! laid out as `(c_in·k) × (batch·t_out)`, so the whole minibatch shares one
//! matrix product. The GEMM itself comes from `matrixmultiply`.

use super::Element;
use crate::par;

struct SendPtr<T>(*mut T);
unsafe impl<T> Send for SendPtr<T> {}
unsafe impl<T> Sync for SendPtr<T> {}

struct SendConstPtr<T>(*const T);
unsafe impl<T> Send for SendConstPtr<T> {}
unsafe impl<T> Sync for SendConstPtr<T> {}

/// `c = alpha · op(a) · op(b) + beta · c` for row-major contiguous operands,
/// where `op(a)` is `m × k` and `op(b)` is `k × n`. With `trans_a` the buffer
/// `a` holds a `k × m` matrix; with `trans_b`, `b` holds `n × k`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<F: Element>(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    n: usize,
    k: usize,
    alpha: F,
    a: &[F],
    b: &[F],
    beta: F,
    c: &mut [F],
) {
    assert_eq!(a.len(), m * k, "gemm: lhs length");
    assert_eq!(b.len(), k * n, "gemm: rhs length");
    assert_eq!(c.len(), m * n, "gemm: output length");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };

    // Splitting along output columns leaves each element's k-summation
    // untouched, so the result is identical for any number of parts.
    let parts = if m * n * k >= (1 << 20) {
        par::current_threads().min(n / 64).max(1)
    } else {
        1
    };
    if parts == 1 {
        unsafe {
            F::gemm_raw(
                m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
        return;
    }
    let a_ptr = SendConstPtr(a.as_ptr());
    let b_ptr = SendConstPtr(b.as_ptr());
    let c_ptr = SendPtr(c.as_mut_ptr());
    let width = n.div_ceil(parts);
    par::map_indexed(parts, |p| {
        let j0 = p * width;
        let j1 = ((p + 1) * width).min(n);
        if j0 >= j1 {
            return;
        }
        let (a_ptr, b_ptr, c_ptr) = (&a_ptr, &b_ptr, &c_ptr);
        // SAFETY: column ranges [j0, j1) are disjoint across parts and lie
        // inside the buffers checked above.
        unsafe {
            let b_off = if trans_b { j0 * k } else { j0 };
            F::gemm_raw(
                m, k, j1 - j0, alpha, a_ptr.0, rsa, csa, b_ptr.0.add(b_off), rsb, csb, beta,
                c_ptr.0.add(j0), n as isize, 1,
            );
        }
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvDims {
    pub batch: usize,
    pub c_in: usize,
    pub t_in: usize,
    pub c_out: usize,
    pub kernel: usize,
}

impl ConvDims {
    pub fn t_out(&self) -> usize {
        self.t_in + 1 - self.kernel
    }

    fn cols_rows(&self) -> usize {
        self.c_in * self.kernel
    }

    fn cols_width(&self) -> usize {
        self.batch * self.t_out()
    }
}

pub fn im2col<F: Element>(x: &[F], d: &ConvDims) -> Vec<F> {
    let t_out = d.t_out();
    let width = d.cols_width();
    let mut cols = vec![F::zero(); d.cols_rows() * width];
    par::for_each_chunk_mut(&mut cols, width, |r, row| {
        let (ci, kk) = (r / d.kernel, r % d.kernel);
        for b in 0..d.batch {
            let src = &x[(b * d.c_in + ci) * d.t_in + kk..][..t_out];
            row[b * t_out..(b + 1) * t_out].copy_from_slice(src);
        }
    });
    cols
}

/// Valid (no padding), stride-1 convolution. Returns the `[batch, c_out,
/// t_out]` output and the im2col buffer needed by the backward pass.
pub fn conv1d_forward<F: Element>(x: &[F], w: &[F], bias: &[F], d: &ConvDims) -> (Vec<F>, Vec<F>) {
    let cols = im2col(x, d);
    let t_out = d.t_out();
    let width = d.cols_width();
    let mut y = vec![F::zero(); d.c_out * width];
    gemm(false, false, d.c_out, width, d.cols_rows(), F::one(), w, &cols, F::zero(), &mut y);
    let mut out = vec![F::zero(); d.batch * d.c_out * t_out];
    par::for_each_chunk_mut(&mut out, d.c_out * t_out, |b, chunk| {
        for o in 0..d.c_out {
            let src = &y[o * width + b * t_out..][..t_out];
            let bo = bias[o];
            for (dst, &s) in chunk[o * t_out..(o + 1) * t_out].iter_mut().zip(src) {
                *dst = s + bo;
            }
        }
    });
    (out, cols)
}

pub struct ConvGrads<F> {
    pub input: Option<Vec<F>>,
    pub weight: Option<Vec<F>>,
    pub bias: Option<Vec<F>>,
}

pub fn conv1d_backward<F: Element>(
    dout: &[F],
    w: &[F],
    cols: &[F],
    d: &ConvDims,
    need: [bool; 3],
) -> ConvGrads<F> {
    let t_out = d.t_out();
    let width = d.cols_width();
    let mut dy = vec![F::zero(); d.c_out * width];
    par::for_each_chunk_mut(&mut dy, width, |o, row| {
        for b in 0..d.batch {
            row[b * t_out..(b + 1) * t_out]
                .copy_from_slice(&dout[(b * d.c_out + o) * t_out..][..t_out]);
        }
    });

    let weight = need[1].then(|| {
        let mut dw = vec![F::zero(); d.c_out * d.cols_rows()];
        gemm(false, true, d.c_out, d.cols_rows(), width, F::one(), &dy, cols, F::zero(), &mut dw);
        dw
    });
    let bias = need[2].then(|| {
        dy.chunks(width)
            .map(|row| row.iter().fold(F::zero(), |s, &v| s + v))
            .collect()
    });
    let input = need[0].then(|| {
        let mut dcols = vec![F::zero(); d.cols_rows() * width];
        gemm(true, false, d.cols_rows(), width, d.c_out, F::one(), w, &dy, F::zero(), &mut dcols);
        let mut dx = vec![F::zero(); d.batch * d.c_in * d.t_in];
        par::for_each_chunk_mut(&mut dx, d.t_in, |bc, row| {
            let (b, ci) = (bc / d.c_in, bc % d.c_in);
            for kk in 0..d.kernel {
                let src = &dcols[(ci * d.kernel + kk) * width + b * t_out..][..t_out];
                for (dst, &s) in row[kk..kk + t_out].iter_mut().zip(src) {
                    *dst = *dst + s;
                }
            }
        });
        dx
    });
    ConvGrads {
        input,
        weight,
        bias,
    }
}

/// `y[b] = W · x[b] + bias` for `x: [batch, d_in]`, `W: [d_out, d_in]`.
pub fn dense_forward<F: Element>(
    x: &[F],
    w: &[F],
    bias: &[F],
    batch: usize,
    d_in: usize,
    d_out: usize,
) -> Vec<F> {
    let mut y = vec![F::zero(); batch * d_out];
    gemm(false, true, batch, d_out, d_in, F::one(), x, w, F::zero(), &mut y);
    for row in y.chunks_mut(d_out) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v = *v + b;
        }
    }
    y
}

pub struct DenseGrads<F> {
    pub input: Option<Vec<F>>,
    pub weight: Option<Vec<F>>,
    pub bias: Option<Vec<F>>,
}

pub fn dense_backward<F: Element>(
    dy: &[F],
    x: &[F],
    w: &[F],
    batch: usize,
    d_in: usize,
    d_out: usize,
    need: [bool; 3],
) -> DenseGrads<F> {
    let input = need[0].then(|| {
        let mut dx = vec![F::zero(); batch * d_in];
        gemm(false, false, batch, d_in, d_out, F::one(), dy, w, F::zero(), &mut dx);
        dx
    });
    let weight = need[1].then(|| {
        let mut dw = vec![F::zero(); d_out * d_in];
        gemm(true, false, d_out, d_in, batch, F::one(), dy, x, F::zero(), &mut dw);
        dw
    });
    let bias = need[2].then(|| {
        let mut db = vec![F::zero(); d_out];
        for row in dy.chunks(d_out) {
            for (acc, &g) in db.iter_mut().zip(row) {
                *acc = *acc + g;
            }
        }
        db
    });
    DenseGrads {
        input,
        weight,
        bias,
    }
}

/// Max over the last axis of `[rows, t]`; ties go to the lowest index.
pub fn max_pool_last<F: Element>(x: &[F], rows: usize, t: usize) -> (Vec<F>, Vec<usize>) {
    let mut out = Vec::with_capacity(rows);
    let mut arg = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x[r * t..(r + 1) * t];
        let mut best = 0;
        for (i, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = i;
            }
        }
        out.push(row[best]);
        arg.push(best);
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
            }
        }
        c
    }

    fn transpose(a: &[f64], r: usize, c: usize) -> Vec<f64> {
        let mut t = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                t[j * r + i] = a[i * c + j];
            }
        }
        t
    }

    #[test]
    fn gemm_matches_naive_in_all_transpose_modes() {
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        let want = naive_matmul(&a, &b, m, k, n);
        let at = transpose(&a, m, k);
        let bt = transpose(&b, k, n);
        for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
            let aa = if ta { &at } else { &a };
            let bb = if tb { &bt } else { &b };
            let mut c = vec![0.0; m * n];
            gemm(ta, tb, m, n, k, 1.0, aa, bb, 0.0, &mut c);
            for (x, y) in c.iter().zip(&want) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_matches_direct_sum() {
        let d = ConvDims {
            batch: 2,
            c_in: 3,
            t_in: 11,
            c_out: 4,
            kernel: 5,
        };
        let x: Vec<f64> = (0..d.batch * d.c_in * d.t_in).map(|i| (i as f64 * 0.3).sin()).collect();
        let w: Vec<f64> = (0..d.c_out * d.c_in * d.kernel).map(|i| (i as f64 * 0.7).cos()).collect();
        let bias = vec![0.5, -0.25, 0.0, 1.0];
        let (out, _) = conv1d_forward(&x, &w, &bias, &d);
        let t_out = d.t_out();
        for b in 0..d.batch {
            for o in 0..d.c_out {
                for t in 0..t_out {
                    let mut s = bias[o];
                    for i in 0..d.c_in {
                        for kk in 0..d.kernel {
                            s += x[(b * d.c_in + i) * d.t_in + t + kk]
                                * w[(o * d.c_in + i) * d.kernel + kk];
                        }
                    }
                    assert!((out[(b * d.c_out + o) * t_out + t] - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn max_pool_prefers_first_maximum() {
        let (v, a) = max_pool_last(&[1.0f32, 3.0, 3.0, 0.0, 2.0, 2.0], 2, 3);
        assert_eq!(v, vec![3.0, 2.0]);
        assert_eq!(a, vec![1, 1]);
    }
}

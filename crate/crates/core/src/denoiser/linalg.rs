//! Dense kernels shared by the forward and backward passes.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewMut2, Axis};

use super::params::{BatchNorm, Linear, RunningStats};
use crate::par;

pub const NORM_EPS: f64 = 1e-5;
const ROWS_PER_CHUNK: usize = 128;

/// `a · b`, split into fixed row blocks so results do not depend on the
/// thread count.
pub fn matmul(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    debug_assert_eq!(k, b.nrows());
    let n = b.ncols();
    let mut out = Array2::zeros((m, n));
    if m == 0 || n == 0 {
        return out;
    }
    par::for_each_row_chunk(out.as_slice_mut().expect("standard layout"), n, ROWS_PER_CHUNK, |chunk, row0| {
        let rows = chunk.len() / n;
        let mut view = ArrayViewMut2::from_shape((rows, n), chunk).expect("chunk shape");
        general_mat_mul(1.0, &a.slice(s![row0..row0 + rows, ..]), &b, 0.0, &mut view);
    });
    out
}

/// `acc += aᵀ · b`.
pub fn add_tn(acc: &mut Array2<f64>, a: ArrayView2<f64>, b: ArrayView2<f64>) {
    general_mat_mul(1.0, &a.t(), &b, 1.0, acc);
}

pub fn affine(x: ArrayView2<f64>, lin: &Linear) -> Array2<f64> {
    let mut out = matmul(x, lin.w.view());
    out += &lin.b;
    out
}

/// Accumulate the affine-map gradients and return the input gradient when
/// asked for.
pub fn affine_backward(
    x: ArrayView2<f64>,
    lin: &Linear,
    grad: &mut Linear,
    dy: ArrayView2<f64>,
    want_input: bool,
) -> Option<Array2<f64>> {
    add_tn(&mut grad.w, x, dy);
    grad.b += &dy.sum_axis(Axis(0));
    want_input.then(|| matmul(dy, lin.w.t()))
}

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// `dy` masked by `pre > 0`.
pub fn relu_backward(pre: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut out = dy.clone();
    out.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out[k] += rows[index[k]]` for every row `k` of `out`.
pub fn gather_add(out: &mut Array2<f64>, rows: &Array2<f64>, index: &[usize]) {
    let d = out.ncols();
    if d == 0 {
        return;
    }
    par::for_each_row_chunk(out.as_slice_mut().expect("standard layout"), d, ROWS_PER_CHUNK, |chunk, row0| {
        for (r, row) in chunk.chunks_mut(d).enumerate() {
            let src = rows.row(index[row0 + r]);
            for (o, s) in row.iter_mut().zip(src) {
                *o += s;
            }
        }
    });
}

/// `out[index[k]] += rows[k]`.
pub fn scatter_add(out: &mut Array2<f64>, rows: &Array2<f64>, index: &[usize]) {
    for (k, &i) in index.iter().enumerate() {
        let mut target = out.row_mut(i);
        target += &rows.row(k);
    }
}

/// Per-column batch statistics (biased variance).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

/// What the normalization backward pass needs.
#[derive(Debug, Clone)]
pub struct NormCache {
    pub normalized: Array2<f64>,
    pub inv_std: Array1<f64>,
}

/// Batch normalization. Training uses the batch's own statistics and
/// returns them; inference uses the running statistics.
pub fn norm_forward(
    x: &Array2<f64>,
    norm: &BatchNorm,
    running: &RunningStats,
    train: bool,
) -> (Array2<f64>, Option<NormCache>, Option<BatchStats>) {
    let rows = x.nrows();
    let (mean, var) = if train && rows > 0 {
        let mean = x.sum_axis(Axis(0)) / rows as f64;
        let mut var = Array1::zeros(x.ncols());
        for row in x.rows() {
            for ((v, &xi), &mu) in var.iter_mut().zip(row).zip(&mean) {
                let c = xi - mu;
                *v += c * c;
            }
        }
        var /= rows as f64;
        (mean, var)
    } else {
        (running.mean.clone(), running.var.clone())
    };
    let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
    let mut normalized = x - &mean;
    normalized *= &inv_std;
    let mut y = &normalized * &norm.scale;
    y += &norm.shift;
    if train {
        let stats = (rows > 0).then_some(BatchStats { mean, var });
        (y, Some(NormCache { normalized, inv_std }), stats)
    } else {
        (y, None, None)
    }
}

/// `dx = scale·inv_std/m · (m·dy − Σdy − x̂·Σ(dy ⊙ x̂))`, accumulating the
/// scale and shift gradients into `grad`.
pub fn norm_backward(dy: &Array2<f64>, cache: &NormCache, norm: &BatchNorm, grad: &mut BatchNorm) -> Array2<f64> {
    let rows = dy.nrows();
    if rows == 0 {
        return dy.clone();
    }
    let sum_dy = dy.sum_axis(Axis(0));
    let sum_dy_xhat = (dy * &cache.normalized).sum_axis(Axis(0));
    grad.scale += &sum_dy_xhat;
    grad.shift += &sum_dy;
    let m = rows as f64;
    let coef = &norm.scale * &cache.inv_std / m;
    let mut dx = dy * m;
    dx -= &sum_dy;
    dx -= &(&cache.normalized * &sum_dy_xhat);
    dx *= &coef;
    dx
}

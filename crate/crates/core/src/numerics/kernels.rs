//! Flat-slice kernels behind the graph primitives.
//!
//! Every reduction runs in a fixed order that depends only on the shapes of
//! one output element's inputs, never on the batch size. That keeps batched
//! and per-item evaluation bit-identical.

use super::tensor::Element;

// ── Matrix products ──────────────────────────────────────────────────

/// `c[m,n] = a[m,k] · b[k,n]`
pub fn matmul<T: Element>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in row.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// `c[m,k] = a[m,n] · b[k,n]ᵀ`
pub fn matmul_nt<T: Element>(a: &[T], b: &[T], m: usize, n: usize, k: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut acc = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            c[i * k + p] = acc;
        }
    }
    c
}

/// `c[k,n] = a[m,k]ᵀ · d[m,n]`
pub fn matmul_tn<T: Element>(a: &[T], d: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); k * n];
    for i in 0..m {
        let drow = &d[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, &dv) in crow.iter_mut().zip(drow) {
                *cv += av * dv;
            }
        }
    }
    c
}

// ── Convolution ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub groups: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.padding - self.k_h) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.padding - self.k_w) / self.stride + 1
    }

    pub fn out_len(&self) -> usize {
        self.batch * self.out_c * self.out_h() * self.out_w()
    }

    fn in_per_group(&self) -> usize {
        self.in_c / self.groups
    }

    fn out_per_group(&self) -> usize {
        self.out_c / self.groups
    }

    /// Output columns `ow` whose input column `ow*stride + kj - padding` is in range.
    fn valid_cols(&self, kj: usize, out_w: usize) -> (usize, usize) {
        valid_range(kj, self.stride, self.padding, self.in_w, out_w)
    }

    fn valid_rows(&self, ki: usize, out_h: usize) -> (usize, usize) {
        valid_range(ki, self.stride, self.padding, self.in_h, out_h)
    }
}

fn valid_range(
    k: usize,
    stride: usize,
    pad: usize,
    in_len: usize,
    out_len: usize,
) -> (usize, usize) {
    // need o*stride + k >= pad and o*stride + k - pad <= in_len - 1
    let lo = if k >= pad {
        0
    } else {
        (pad - k).div_ceil(stride)
    };
    let hi_num = in_len - 1 + pad;
    let hi = if hi_num < k {
        0
    } else {
        ((hi_num - k) / stride + 1).min(out_len)
    };
    (lo, hi.max(lo))
}

/// Grouped cross-correlation. `w` is `[out_c, in_c/groups, k_h, k_w]`.
pub fn conv2d<T: Element>(x: &[T], w: &[T], bias: Option<&[T]>, g: &ConvGeometry) -> Vec<T> {
    let (oh_n, ow_n) = (g.out_h(), g.out_w());
    let (cg, og) = (g.in_per_group(), g.out_per_group());
    let mut out = vec![T::zero(); g.out_len()];
    for b in 0..g.batch {
        for o in 0..g.out_c {
            let grp = o / og;
            let plane =
                &mut out[(b * g.out_c + o) * oh_n * ow_n..(b * g.out_c + o + 1) * oh_n * ow_n];
            if let Some(bias) = bias {
                plane.iter_mut().for_each(|v| *v = bias[o]);
            }
            for icl in 0..cg {
                let ic = grp * cg + icl;
                let xin = &x
                    [(b * g.in_c + ic) * g.in_h * g.in_w..(b * g.in_c + ic + 1) * g.in_h * g.in_w];
                for ki in 0..g.k_h {
                    let (r0, r1) = g.valid_rows(ki, oh_n);
                    for kj in 0..g.k_w {
                        let wv = w[((o * cg + icl) * g.k_h + ki) * g.k_w + kj];
                        let (c0, c1) = g.valid_cols(kj, ow_n);
                        if c0 == c1 {
                            continue;
                        }
                        for oh in r0..r1 {
                            let ih = oh * g.stride + ki - g.padding;
                            let orow = &mut plane[oh * ow_n..(oh + 1) * ow_n];
                            let xrow = &xin[ih * g.in_w..(ih + 1) * g.in_w];
                            if g.stride == 1 {
                                let shift = c0 + kj - g.padding;
                                for (ov, &xv) in
                                    orow[c0..c1].iter_mut().zip(&xrow[shift..shift + (c1 - c0)])
                                {
                                    *ov += wv * xv;
                                }
                            } else {
                                for ow in c0..c1 {
                                    orow[ow] += wv * xrow[ow * g.stride + kj - g.padding];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of [`conv2d`] w.r.t. input, kernel and bias.
#[allow(clippy::needless_range_loop)]
pub fn conv2d_backward<T: Element>(
    x: &[T],
    w: &[T],
    dy: &[T],
    g: &ConvGeometry,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (oh_n, ow_n) = (g.out_h(), g.out_w());
    let (cg, og) = (g.in_per_group(), g.out_per_group());
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); w.len()];
    let mut db = vec![T::zero(); g.out_c];
    for b in 0..g.batch {
        for o in 0..g.out_c {
            let grp = o / og;
            let dplane = &dy[(b * g.out_c + o) * oh_n * ow_n..(b * g.out_c + o + 1) * oh_n * ow_n];
            db[o] += dplane.iter().copied().sum::<T>();
            for icl in 0..cg {
                let ic = grp * cg + icl;
                let base = (b * g.in_c + ic) * g.in_h * g.in_w;
                for ki in 0..g.k_h {
                    let (r0, r1) = g.valid_rows(ki, oh_n);
                    for kj in 0..g.k_w {
                        let widx = ((o * cg + icl) * g.k_h + ki) * g.k_w + kj;
                        let wv = w[widx];
                        let (c0, c1) = g.valid_cols(kj, ow_n);
                        let mut acc = T::zero();
                        for oh in r0..r1 {
                            let ih = oh * g.stride + ki - g.padding;
                            let drow = &dplane[oh * ow_n..(oh + 1) * ow_n];
                            let row0 = base + ih * g.in_w;
                            for ow in c0..c1 {
                                let iw = ow * g.stride + kj - g.padding;
                                acc += x[row0 + iw] * drow[ow];
                                dx[row0 + iw] += wv * drow[ow];
                            }
                        }
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

// ── Row-wise normalizations ──────────────────────────────────────────

/// Softmax over the middle axis of an `[outer, len, inner]` layout.
pub fn softmax<T: Element>(x: &[T], outer: usize, len: usize, inner: usize) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * len + j) * inner + i;
            let mut max = T::neg_infinity();
            for j in 0..len {
                max = max.max(x[at(j)]);
            }
            let mut sum = T::zero();
            for j in 0..len {
                let e = (x[at(j)] - max).exp();
                y[at(j)] = e;
                sum += e;
            }
            for j in 0..len {
                y[at(j)] = y[at(j)] / sum;
            }
        }
    }
    y
}

pub fn softmax_backward<T: Element>(
    y: &[T],
    dy: &[T],
    outer: usize,
    len: usize,
    inner: usize,
) -> Vec<T> {
    let mut dx = vec![T::zero(); y.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * len + j) * inner + i;
            let mut dot = T::zero();
            for j in 0..len {
                dot += y[at(j)] * dy[at(j)];
            }
            for j in 0..len {
                dx[at(j)] = y[at(j)] * (dy[at(j)] - dot);
            }
        }
    }
    dx
}

fn row_stats<T: Element>(row: &[T], eps: f64) -> (T, T) {
    let n = T::from_f64(row.len() as f64);
    let mean = row.iter().copied().sum::<T>() / n;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, (var + T::from_f64(eps)).sqrt().recip())
}

/// Layer normalization over the last axis (rows of length `c`).
pub fn layer_norm<T: Element>(x: &[T], gamma: &[T], beta: &[T], c: usize, eps: f64) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    for (row, out) in x.chunks_exact(c).zip(y.chunks_exact_mut(c)) {
        let (mean, rstd) = row_stats(row, eps);
        for j in 0..c {
            out[j] = (row[j] - mean) * rstd * gamma[j] + beta[j];
        }
    }
    y
}

pub fn layer_norm_backward<T: Element>(
    x: &[T],
    gamma: &[T],
    dy: &[T],
    c: usize,
    eps: f64,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut dx = vec![T::zero(); x.len()];
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    let n = T::from_f64(c as f64);
    let mut xhat = vec![T::zero(); c];
    let mut dxhat = vec![T::zero(); c];
    for ((row, drow), out) in x
        .chunks_exact(c)
        .zip(dy.chunks_exact(c))
        .zip(dx.chunks_exact_mut(c))
    {
        let (mean, rstd) = row_stats(row, eps);
        let mut mean_d = T::zero();
        let mut mean_dx = T::zero();
        for j in 0..c {
            xhat[j] = (row[j] - mean) * rstd;
            dxhat[j] = drow[j] * gamma[j];
            dgamma[j] += drow[j] * xhat[j];
            dbeta[j] += drow[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[j];
        }
        mean_d = mean_d / n;
        mean_dx = mean_dx / n;
        for j in 0..c {
            out[j] = rstd * (dxhat[j] - mean_d - xhat[j] * mean_dx);
        }
    }
    (dx, dgamma, dbeta)
}

// ── Pointwise ────────────────────────────────────────────────────────

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

/// GELU, tanh approximation.
pub fn gelu<T: Element>(x: T) -> T {
    let c = T::from_f64(SQRT_2_OVER_PI);
    let a = T::from_f64(GELU_CUBIC);
    let half = T::from_f64(0.5);
    half * x * (T::one() + (c * (x + a * x * x * x)).tanh())
}

pub fn gelu_grad<T: Element>(x: T) -> T {
    let c = T::from_f64(SQRT_2_OVER_PI);
    let a = T::from_f64(GELU_CUBIC);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let t = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + three * a * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_range_matches_bruteforce() {
        for stride in 1..4 {
            for pad in 0..3 {
                for k in 0..5 {
                    for in_len in 1..9 {
                        if in_len + 2 * pad < k + 1 {
                            continue;
                        }
                        let out_len = (in_len + 2 * pad - (k + 1)) / stride + 1;
                        let brute: Vec<usize> = (0..out_len)
                            .filter(|&o| {
                                let i = (o * stride + k) as isize - pad as isize;
                                i >= 0 && (i as usize) < in_len
                            })
                            .collect();
                        let (lo, hi) = valid_range(k, stride, pad, in_len, out_len);
                        assert_eq!(
                            (lo..hi).collect::<Vec<_>>(),
                            brute,
                            "s{stride} p{pad} k{k} n{in_len}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn transposed_products_agree_with_plain() {
        let a: Vec<f64> = (0..6).map(|v| v as f64 * 0.5 - 1.0).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64).sin()).collect(); // 3x4
        let c = matmul(&a, &b, 2, 3, 4);
        let mut bt = vec![0.0; 12];
        for p in 0..3 {
            for j in 0..4 {
                bt[j * 3 + p] = b[p * 4 + j];
            }
        }
        assert_eq!(matmul_nt(&a, &bt, 2, 3, 4), c);
        let mut at = vec![0.0; 6];
        for i in 0..2 {
            for p in 0..3 {
                at[p * 2 + i] = a[i * 3 + p];
            }
        }
        let c2 = matmul_tn(&at, &b, 3, 2, 4);
        for (x, y) in c.iter().zip(&c2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0f64), 0.0);
        assert!((gelu(1.0f64) - 0.841_191_990_4).abs() < 1e-9);
        assert!((gelu(-3.0f64) + 0.003_637_392_4).abs() < 1e-9);
    }
}

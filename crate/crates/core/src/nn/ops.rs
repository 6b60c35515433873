//! Stateless forward/backward kernels on [`Tensor3`].

use super::tensor::Tensor3;

pub const LEAKY_SLOPE: f64 = 0.2;

/// Row-major `c[m×n] = alpha * a[m×k] · b[k×n] + beta * c`, with optional transposes.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slices have the lengths asserted above and strides describe them exactly.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfold `x` into columns for a `k×k` stride-1 convolution with zero "same" padding.
/// Output layout: `[c*k*k][h*w]`.
pub fn im2col(x: &Tensor3, k: usize) -> Vec<f64> {
    let (c, h, w) = x.shape();
    if k == 1 {
        return x.data.clone();
    }
    let pad = (k / 2) as isize;
    let hw = h * w;
    let mut cols = vec![0.0; c * k * k * hw];
    for ci in 0..c {
        let src = x.channel(ci);
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut cols[row * hw..(row + 1) * hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src_row = &src[sy as usize * w..(sy as usize + 1) * w];
                    let dst_row = &mut dst[y * w..(y + 1) * w];
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    for xx in x0..x1 {
                        dst_row[xx] = src_row[(xx as isize + dx) as usize];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
pub fn col2im(cols: &[f64], c: usize, h: usize, w: usize, k: usize) -> Tensor3 {
    if k == 1 {
        return Tensor3::from_vec(c, h, w, cols.to_vec());
    }
    let pad = (k / 2) as isize;
    let hw = h * w;
    let mut out = Tensor3::zeros(c, h, w);
    for ci in 0..c {
        let dst = &mut out.data[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &cols[row * hw..(row + 1) * hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    for xx in x0..x1 {
                        dst[sy as usize * w + (xx as isize + dx) as usize] += src[y * w + xx];
                    }
                }
            }
        }
    }
    out
}

pub fn leaky_relu(x: &Tensor3) -> Tensor3 {
    let data = x
        .data
        .iter()
        .map(|&v| if v > 0.0 { v } else { LEAKY_SLOPE * v })
        .collect();
    Tensor3::from_vec(x.c, x.h, x.w, data)
}

pub fn leaky_relu_backward(x: &Tensor3, dy: &Tensor3) -> Tensor3 {
    let data = x
        .data
        .iter()
        .zip(&dy.data)
        .map(|(&v, &g)| if v > 0.0 { g } else { LEAKY_SLOPE * g })
        .collect();
    Tensor3::from_vec(x.c, x.h, x.w, data)
}

pub fn leaky_relu_vec(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| if v > 0.0 { v } else { LEAKY_SLOPE * v })
        .collect()
}

pub fn leaky_relu_vec_backward(x: &[f64], dy: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(dy)
        .map(|(&v, &g)| if v > 0.0 { g } else { LEAKY_SLOPE * g })
        .collect()
}

/// 2×2 average pooling; odd trailing rows/columns are dropped.
pub fn avg_pool2(x: &Tensor3) -> Tensor3 {
    let (c, h, w) = x.shape();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor3::zeros(c, oh, ow);
    for ci in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                let s = x.at(ci, 2 * y, 2 * xx)
                    + x.at(ci, 2 * y, 2 * xx + 1)
                    + x.at(ci, 2 * y + 1, 2 * xx)
                    + x.at(ci, 2 * y + 1, 2 * xx + 1);
                let i = out.idx(ci, y, xx);
                out.data[i] = 0.25 * s;
            }
        }
    }
    out
}

pub fn avg_pool2_backward(dy: &Tensor3, h: usize, w: usize) -> Tensor3 {
    let mut dx = Tensor3::zeros(dy.c, h, w);
    for ci in 0..dy.c {
        for y in 0..dy.h {
            for xx in 0..dy.w {
                let g = 0.25 * dy.at(ci, y, xx);
                for (oy, ox) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let i = dx.idx(ci, 2 * y + oy, 2 * xx + ox);
                    dx.data[i] = g;
                }
            }
        }
    }
    dx
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample2(x: &Tensor3) -> Tensor3 {
    let (c, h, w) = x.shape();
    let mut out = Tensor3::zeros(c, 2 * h, 2 * w);
    for ci in 0..c {
        for y in 0..2 * h {
            for xx in 0..2 * w {
                let i = out.idx(ci, y, xx);
                out.data[i] = x.at(ci, y / 2, xx / 2);
            }
        }
    }
    out
}

pub fn upsample2_backward(dy: &Tensor3) -> Tensor3 {
    let mut dx = Tensor3::zeros(dy.c, dy.h / 2, dy.w / 2);
    for ci in 0..dy.c {
        for y in 0..dy.h {
            for xx in 0..dy.w {
                let i = dx.idx(ci, y / 2, xx / 2);
                dx.data[i] += dy.at(ci, y, xx);
            }
        }
    }
    dx
}

/// Per-channel spatial mean.
pub fn global_avg_pool(x: &Tensor3) -> Vec<f64> {
    let p = x.plane() as f64;
    (0..x.c).map(|c| x.channel(c).iter().sum::<f64>() / p).collect()
}

pub fn global_avg_pool_backward(dy: &[f64], h: usize, w: usize) -> Tensor3 {
    let p = (h * w) as f64;
    let mut dx = Tensor3::zeros(dy.len(), h, w);
    for (c, g) in dy.iter().enumerate() {
        dx.data[c * h * w..(c + 1) * h * w].fill(g / p);
    }
    dx
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, overflow-safe.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

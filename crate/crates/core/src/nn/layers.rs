//! Parametric layers. A layer owns only offsets into its network's flat
//! parameter vector; the matching gradient vector uses the same layout.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ops;
use super::tensor::Tensor3;
use crate::rng;

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Const(f64),
    Normal(f64),
    Uniform(f64),
}

/// Allocates parameter ranges and remembers how to initialise them.
#[derive(Debug, Default)]
pub struct ParamBuilder {
    len: usize,
    specs: Vec<(usize, usize, Init)>,
}

impl ParamBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&mut self, n: usize, init: Init) -> usize {
        let off = self.len;
        self.specs.push((off, n, init));
        self.len += n;
        off
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn build(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng::rng(seed);
        let mut p = vec![0.0; self.len];
        for &(off, n, init) in &self.specs {
            let dst = &mut p[off..off + n];
            match init {
                Init::Zeros => {}
                Init::Const(v) => dst.fill(v),
                Init::Normal(std) => {
                    for v in dst {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = std * z;
                    }
                }
                Init::Uniform(b) => {
                    for v in dst {
                        *v = rng.random_range(-b..b);
                    }
                }
            }
        }
        p
    }
}

/// He-style bound for a leaky-ReLU layer with the given fan-in.
fn he_uniform(fan_in: usize) -> Init {
    let gain = (2.0 / (1.0 + ops::LEAKY_SLOPE * ops::LEAKY_SLOPE)).sqrt();
    Init::Uniform(gain * (3.0 / fan_in as f64).sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Linear {
    pub input: usize,
    pub output: usize,
    w: usize,
    b: usize,
}

impl Linear {
    pub fn new(pb: &mut ParamBuilder, input: usize, output: usize) -> Self {
        Self::with_init(pb, input, output, he_uniform(input), Init::Zeros)
    }

    pub fn with_init(pb: &mut ParamBuilder, input: usize, output: usize, w: Init, b: Init) -> Self {
        let w = pb.alloc(input * output, w);
        let b = pb.alloc(output, b);
        Self { input, output, w, b }
    }

    pub fn forward(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input);
        let w = &p[self.w..self.w + self.input * self.output];
        let mut y = p[self.b..self.b + self.output].to_vec();
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &w[o * self.input..(o + 1) * self.input];
            *yo += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        y
    }

    /// Returns `dL/dx`; accumulates parameter gradients into `g` when given.
    pub fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], g: Option<&mut [f64]>) -> Vec<f64> {
        let w = &p[self.w..self.w + self.input * self.output];
        if let Some(g) = g {
            for (o, &d) in dy.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let gw = &mut g[self.w + o * self.input..self.w + (o + 1) * self.input];
                for (gi, xi) in gw.iter_mut().zip(x) {
                    *gi += d * xi;
                }
                g[self.b + o] += d;
            }
        }
        let mut dx = vec![0.0; self.input];
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &w[o * self.input..(o + 1) * self.input];
            for (dxi, wi) in dx.iter_mut().zip(row) {
                *dxi += d * wi;
            }
        }
        dx
    }
}

/// Stride-1 convolution with zero "same" padding (odd kernel sizes).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    w: usize,
    b: usize,
}

impl Conv2d {
    pub fn new(pb: &mut ParamBuilder, cin: usize, cout: usize, k: usize) -> Self {
        Self::with_init(pb, cin, cout, k, he_uniform(cin * k * k))
    }

    pub fn with_init(pb: &mut ParamBuilder, cin: usize, cout: usize, k: usize, init: Init) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd");
        let w = pb.alloc(cout * cin * k * k, init);
        let b = pb.alloc(cout, Init::Zeros);
        Self { cin, cout, k, w, b }
    }

    fn weights<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w..self.w + self.cout * self.cin * self.k * self.k]
    }

    /// Returns the output and the unfolded input needed by [`Conv2d::backward`].
    pub fn forward(&self, p: &[f64], x: &Tensor3) -> (Tensor3, Vec<f64>) {
        debug_assert_eq!(x.c, self.cin);
        let hw = x.plane();
        let cols = ops::im2col(x, self.k);
        let mut out = Tensor3::zeros(self.cout, x.h, x.w);
        for co in 0..self.cout {
            out.data[co * hw..(co + 1) * hw].fill(p[self.b + co]);
        }
        ops::gemm(
            self.cout,
            self.cin * self.k * self.k,
            hw,
            1.0,
            self.weights(p),
            false,
            &cols,
            false,
            1.0,
            &mut out.data,
        );
        (out, cols)
    }

    pub fn backward(
        &self,
        p: &[f64],
        cols: &[f64],
        dy: &Tensor3,
        g: Option<&mut [f64]>,
        need_dx: bool,
    ) -> Option<Tensor3> {
        let hw = dy.plane();
        let ckk = self.cin * self.k * self.k;
        if let Some(g) = g {
            let gw = &mut g[self.w..self.w + self.cout * ckk];
            ops::gemm(self.cout, hw, ckk, 1.0, &dy.data, false, cols, true, 1.0, gw);
            for co in 0..self.cout {
                g[self.b + co] += dy.channel(co).iter().sum::<f64>();
            }
        }
        if !need_dx {
            return None;
        }
        let mut dcols = vec![0.0; ckk * hw];
        ops::gemm(ckk, self.cout, hw, 1.0, self.weights(p), true, &dy.data, false, 0.0, &mut dcols);
        Some(ops::col2im(&dcols, self.cin, dy.h, dy.w, self.k))
    }
}

/// Adaptive instance normalisation: per-channel instance norm followed by a
/// style-dependent affine map `(1 + gamma(s)) * x_hat + beta(s)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaIn {
    pub channels: usize,
    fc: Linear,
}

#[derive(Debug, Clone)]
pub struct AdaInCache {
    x_hat: Tensor3,
    inv_std: Vec<f64>,
    gamma_beta: Vec<f64>,
}

const NORM_EPS: f64 = 1e-5;

impl AdaIn {
    pub fn new(pb: &mut ParamBuilder, style_dim: usize, channels: usize) -> Self {
        let fc = Linear::with_init(
            pb,
            style_dim,
            2 * channels,
            Init::Uniform((1.0 / style_dim as f64).sqrt()),
            Init::Zeros,
        );
        Self { channels, fc }
    }

    pub fn forward(&self, p: &[f64], x: &Tensor3, s: &[f64]) -> (Tensor3, AdaInCache) {
        let gb = self.fc.forward(p, s);
        let n = x.plane();
        let mut x_hat = x.clone();
        let mut out = x.zeros_like();
        let mut inv_std = Vec::with_capacity(x.c);
        for c in 0..x.c {
            let ch = x.channel(c);
            let mean = ch.iter().sum::<f64>() / n as f64;
            let var = ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + NORM_EPS).sqrt();
            inv_std.push(is);
            let (gamma, beta) = (gb[c], gb[self.channels + c]);
            for i in c * n..(c + 1) * n {
                let xh = (x.data[i] - mean) * is;
                x_hat.data[i] = xh;
                out.data[i] = (1.0 + gamma) * xh + beta;
            }
        }
        (
            out,
            AdaInCache {
                x_hat,
                inv_std,
                gamma_beta: gb,
            },
        )
    }

    /// Returns `(dL/dx, dL/ds)`.
    pub fn backward(
        &self,
        p: &[f64],
        cache: &AdaInCache,
        s: &[f64],
        dy: &Tensor3,
        g: Option<&mut [f64]>,
    ) -> (Tensor3, Vec<f64>) {
        let n = dy.plane();
        let nf = n as f64;
        let mut dgb = vec![0.0; 2 * self.channels];
        let mut dx = dy.zeros_like();
        for c in 0..dy.c {
            let range = c * n..(c + 1) * n;
            let dyc = &dy.data[range.clone()];
            let xh = &cache.x_hat.data[range.clone()];
            dgb[c] = dyc.iter().zip(xh).map(|(a, b)| a * b).sum();
            dgb[self.channels + c] = dyc.iter().sum();
            let scale = 1.0 + cache.gamma_beta[c];
            let sum_dxh: f64 = dyc.iter().sum::<f64>() * scale;
            let sum_dxh_xh: f64 = dgb[c] * scale;
            let is = cache.inv_std[c];
            for (i, (&d, &h)) in range.zip(dyc.iter().zip(xh)) {
                let dxh = d * scale;
                dx.data[i] = is / nf * (nf * dxh - sum_dxh - h * sum_dxh_xh);
            }
        }
        let ds = self.fc.backward(p, s, &dgb, g);
        (dx, ds)
    }
}

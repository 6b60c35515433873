use serde::{Deserialize, Serialize};

/// A single channel-major feature map or image, `[c][h][w]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), c * h * w, "tensor data length mismatch");
        Self { c, h, w, data }
    }

    pub fn filled(c: usize, h: usize, w: usize, v: f64) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![v; c * h * w],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn same_shape(&self, other: &Tensor3) -> bool {
        self.shape() == other.shape()
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    #[inline]
    pub fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.h + y) * self.w + x
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(c, y, x)]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.c, self.h, self.w)
    }

    pub fn add_assign(&mut self, other: &Tensor3) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `dst += k * src`.
pub fn axpy(dst: &mut [f64], k: f64, src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += k * s;
    }
}

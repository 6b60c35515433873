use serde::{Deserialize, Serialize};

use super::layers::{Conv2d, ParamBuilder};
use super::ops;
use super::tensor::Tensor3;

/// `pre_pool` × avg-pool, then a stack of `conv3x3 → leaky ReLU [→ avg-pool]`.
/// Shared feature extractor of the discriminator, style encoder and regressor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvTrunk {
    pub pre_pool: usize,
    pub convs: Vec<Conv2d>,
    pub pool_after: Vec<bool>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    cols: Vec<f64>,
    pre_act: Tensor3,
    pooled: bool,
}

#[derive(Debug, Clone)]
pub struct TrunkCache {
    input_shapes: Vec<(usize, usize)>,
    layers: Vec<LayerCache>,
}

impl ConvTrunk {
    pub fn new(pb: &mut ParamBuilder, cin: usize, widths: &[usize], pool_after: &[bool], pre_pool: usize) -> Self {
        assert_eq!(widths.len(), pool_after.len());
        let mut convs = Vec::with_capacity(widths.len());
        let mut c = cin;
        for &w in widths {
            convs.push(Conv2d::new(pb, c, w, 3));
            c = w;
        }
        Self {
            pre_pool,
            convs,
            pool_after: pool_after.to_vec(),
        }
    }

    /// Output `(c, h, w)` for an input of spatial size `h × w`.
    pub fn output_shape(&self, h: usize, w: usize) -> (usize, usize, usize) {
        let (mut h, mut w) = (h >> self.pre_pool, w >> self.pre_pool);
        for &p in &self.pool_after {
            if p {
                h /= 2;
                w /= 2;
            }
        }
        (self.convs.last().map_or(0, |c| c.cout), h, w)
    }

    pub fn forward(&self, p: &[f64], x: &Tensor3) -> (Tensor3, TrunkCache) {
        let mut input_shapes = Vec::with_capacity(self.pre_pool);
        let mut h = x.clone();
        for _ in 0..self.pre_pool {
            input_shapes.push((h.h, h.w));
            h = ops::avg_pool2(&h);
        }
        let mut layers = Vec::with_capacity(self.convs.len());
        for (conv, &pool) in self.convs.iter().zip(&self.pool_after) {
            let (z, cols) = conv.forward(p, &h);
            let a = ops::leaky_relu(&z);
            h = if pool { ops::avg_pool2(&a) } else { a };
            layers.push(LayerCache {
                cols,
                pre_act: z,
                pooled: pool,
            });
        }
        (h, TrunkCache { input_shapes, layers })
    }

    pub fn backward(
        &self,
        p: &[f64],
        cache: &TrunkCache,
        dout: Tensor3,
        mut g: Option<&mut [f64]>,
        need_dx: bool,
    ) -> Option<Tensor3> {
        let mut d = dout;
        for (i, (conv, lc)) in self.convs.iter().zip(&cache.layers).enumerate().rev() {
            if lc.pooled {
                d = ops::avg_pool2_backward(&d, lc.pre_act.h, lc.pre_act.w);
            }
            let dz = ops::leaky_relu_backward(&lc.pre_act, &d);
            let want_dx = i > 0 || need_dx;
            match conv.backward(p, &lc.cols, &dz, g.as_deref_mut(), want_dx) {
                Some(dx) => d = dx,
                None => return None,
            }
        }
        if !need_dx {
            return None;
        }
        for &(h, w) in cache.input_shapes.iter().rev() {
            d = ops::avg_pool2_backward(&d, h, w);
        }
        Some(d)
    }
}

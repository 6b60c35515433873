use serde::{Deserialize, Serialize};

use crate::nn::ops::{global_avg_pool, global_avg_pool_backward, leaky_relu_vec, leaky_relu_vec_backward};
use crate::nn::trunk::TrunkCache;
use crate::nn::{ConvTrunk, Init, Linear, ParamBuilder, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressorArch {
    pub base_channels: usize,
    /// Number of `conv → leaky ReLU → pool` blocks.
    pub blocks: usize,
    /// Average-pooling steps applied to the input before the first block.
    pub input_pool: usize,
    pub hidden: usize,
}

impl Default for RegressorArch {
    fn default() -> Self {
        Self {
            base_channels: 8,
            blocks: 4,
            input_pool: 1,
            hidden: 16,
        }
    }
}

impl RegressorArch {
    pub fn validate(&self, image_size: usize) -> crate::Result<()> {
        if self.base_channels == 0 || self.blocks == 0 || self.hidden == 0 {
            return crate::error::config("regressor widths and block count must be positive");
        }
        if image_size >> (self.input_pool + self.blocks) == 0 {
            return crate::error::config(format!(
                "{image_size}px input is too small for {} pooling steps",
                self.input_pool + self.blocks
            ));
        }
        Ok(())
    }
}

/// CNN `f: image → severity`: conv blocks, global average pooling and a two-layer head.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionModel {
    pub arch: RegressorArch,
    trunk: ConvTrunk,
    fc1: Linear,
    fc2: Linear,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RegressorCache {
    trunk: TrunkCache,
    feat_shape: (usize, usize, usize),
    pooled: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
}

impl RegressionModel {
    /// `initial_output` is the constant the untrained network starts near,
    /// typically the mean training label.
    pub fn new(arch: RegressorArch, initial_output: f64, seed: u64) -> Self {
        let c = arch.base_channels;
        let widths: Vec<usize> = (0..arch.blocks).map(|i| c << i.min(2)).collect();
        let mut pb = ParamBuilder::new();
        let trunk = ConvTrunk::new(&mut pb, 3, &widths, &vec![true; arch.blocks], arch.input_pool);
        let nf = *widths.last().expect("at least one block");
        let fc1 = Linear::new(&mut pb, nf, arch.hidden);
        let fc2 = Linear::with_init(
            &mut pb,
            arch.hidden,
            1,
            Init::Uniform((1.0 / arch.hidden as f64).sqrt()),
            Init::Const(initial_output),
        );
        Self {
            arch,
            trunk,
            fc1,
            fc2,
            params: pb.build(seed),
        }
    }

    pub fn forward(&self, x: &Tensor3) -> (f64, RegressorCache) {
        let p = &self.params;
        let (feat, trunk) = self.trunk.forward(p, x);
        let pooled = global_avg_pool(&feat);
        let hidden_pre = self.fc1.forward(p, &pooled);
        let hidden = leaky_relu_vec(&hidden_pre);
        let out = self.fc2.forward(p, &hidden)[0];
        let cache = RegressorCache {
            trunk,
            feat_shape: feat.shape(),
            pooled,
            hidden_pre,
            hidden,
        };
        (out, cache)
    }

    pub fn predict(&self, x: &Tensor3) -> f64 {
        self.forward(x).0
    }

    /// Accumulate `dy · ∂f/∂θ` into `g`.
    pub fn backward(&self, cache: &RegressorCache, dy: f64, g: &mut [f64]) {
        let p = &self.params;
        let dh = self.fc2.backward(p, &cache.hidden, &[dy], Some(&mut *g));
        let dh_pre = leaky_relu_vec_backward(&cache.hidden_pre, &dh);
        let dpooled = self.fc1.backward(p, &cache.pooled, &dh_pre, Some(&mut *g));
        let (_, h, w) = cache.feat_shape;
        let dfeat = global_avg_pool_backward(&dpooled, h, w);
        self.trunk.backward(p, &cache.trunk, dfeat, Some(g), false);
    }
}

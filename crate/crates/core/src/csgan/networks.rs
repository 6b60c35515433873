//! The four csGAN networks. Each owns a flat parameter vector; backward
//! passes accumulate into a caller-provided gradient buffer of the same length.

use serde::{Deserialize, Serialize};

use crate::nn::ops::{self, leaky_relu, leaky_relu_backward, leaky_relu_vec, leaky_relu_vec_backward};
use crate::nn::{AdaIn, Conv2d, ConvTrunk, Init, Linear, ParamBuilder, Tensor3};
use crate::nn::trunk::TrunkCache;
use crate::nn::layers::AdaInCache;

/// Network sizes. The defaults are the desk-scale configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub image_size: usize,
    pub levels: usize,
    pub style_dim: usize,
    pub latent_dim: usize,
    pub mapping_hidden: usize,
    pub base_channels: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            levels: 4,
            style_dim: 16,
            latent_dim: 8,
            mapping_hidden: 32,
            base_channels: 8,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.image_size < 16 || self.image_size % 16 != 0 {
            return crate::error::config(format!("image_size {} must be a positive multiple of 16", self.image_size));
        }
        if self.levels < 3 {
            return crate::error::config("csGAN needs at least 3 levels for the order loss");
        }
        if self.style_dim == 0 || self.latent_dim == 0 || self.mapping_hidden == 0 || self.base_channels == 0 {
            return crate::error::config("network widths must be positive");
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- mapping

/// `z ↦ [s_1, …, s_L]`: a three-layer MLP whose last layer emits all L styles at once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MappingNetwork {
    pub levels: usize,
    pub style_dim: usize,
    l1: Linear,
    l2: Linear,
    out: Linear,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MappingCache {
    z: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
}

impl MappingNetwork {
    pub fn new(arch: &ArchConfig, seed: u64) -> Self {
        let mut pb = ParamBuilder::new();
        let l1 = Linear::new(&mut pb, arch.latent_dim, arch.mapping_hidden);
        let l2 = Linear::new(&mut pb, arch.mapping_hidden, arch.mapping_hidden);
        let out = Linear::with_init(
            &mut pb,
            arch.mapping_hidden,
            arch.levels * arch.style_dim,
            Init::Uniform((3.0 / arch.mapping_hidden as f64).sqrt()),
            Init::Zeros,
        );
        Self {
            levels: arch.levels,
            style_dim: arch.style_dim,
            l1,
            l2,
            out,
            params: pb.build(seed),
        }
    }

    /// Flat level-major styles `[L * d]`.
    pub fn forward(&self, z: &[f64]) -> (Vec<f64>, MappingCache) {
        let p = &self.params;
        let z1 = self.l1.forward(p, z);
        let a1 = leaky_relu_vec(&z1);
        let z2 = self.l2.forward(p, &a1);
        let a2 = leaky_relu_vec(&z2);
        let s = self.out.forward(p, &a2);
        (
            s,
            MappingCache {
                z: z.to_vec(),
                z1,
                a1,
                z2,
                a2,
            },
        )
    }

    pub fn styles(&self, z: &[f64]) -> Vec<f64> {
        self.forward(z).0
    }

    pub fn backward(&self, cache: &MappingCache, ds: &[f64], mut g: Option<&mut [f64]>) {
        let p = &self.params;
        let da2 = self.out.backward(p, &cache.a2, ds, g.as_deref_mut());
        let dz2 = leaky_relu_vec_backward(&cache.z2, &da2);
        let da1 = self.l2.backward(p, &cache.a1, &dz2, g.as_deref_mut());
        let dz1 = leaky_relu_vec_backward(&cache.z1, &da1);
        self.l1.backward(p, &cache.z, &dz1, g);
    }
}

// ---------------------------------------------------------------- generator

/// Encoder–decoder generator. Three average-pool stages down, three
/// nearest-neighbour stages up, AdaIN style injection at every decoder stage
/// and additive encoder skips. The decoder output is added to the input's
/// logit and squashed with a sigmoid, so output pixels stay in (0, 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Generator {
    enc1: Conv2d,
    enc2: Conv2d,
    enc3: Conv2d,
    dec3: Conv2d,
    ada3: AdaIn,
    dec2: Conv2d,
    ada2: AdaIn,
    dec1: Conv2d,
    ada1: AdaIn,
    to_rgb: Conv2d,
    pub params: Vec<f64>,
}

const LOGIT_CLAMP: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GeneratorCache {
    x: Tensor3,
    cols1: Vec<f64>,
    z1: Tensor3,
    cols2: Vec<f64>,
    z2: Tensor3,
    cols3: Vec<f64>,
    z3: Tensor3,
    cols_d3: Vec<f64>,
    ada3: AdaInCache,
    n3: Tensor3,
    cols_d2: Vec<f64>,
    ada2: AdaInCache,
    n2: Tensor3,
    cols_d1: Vec<f64>,
    ada1: AdaInCache,
    n1: Tensor3,
    cols_out: Vec<f64>,
    style: Vec<f64>,
    out: Tensor3,
}

impl Generator {
    pub fn new(arch: &ArchConfig, seed: u64) -> Self {
        let c = arch.base_channels;
        let d = arch.style_dim;
        let mut pb = ParamBuilder::new();
        let enc1 = Conv2d::new(&mut pb, 3, c, 3);
        let enc2 = Conv2d::new(&mut pb, c, 2 * c, 3);
        let enc3 = Conv2d::new(&mut pb, 2 * c, 2 * c, 3);
        let dec3 = Conv2d::new(&mut pb, 2 * c, 2 * c, 3);
        let ada3 = AdaIn::new(&mut pb, d, 2 * c);
        let dec2 = Conv2d::new(&mut pb, 2 * c, 2 * c, 3);
        let ada2 = AdaIn::new(&mut pb, d, 2 * c);
        let dec1 = Conv2d::new(&mut pb, 2 * c, c, 3);
        let ada1 = AdaIn::new(&mut pb, d, c);
        let to_rgb = Conv2d::with_init(&mut pb, c, 3, 1, Init::Uniform(0.1 / (c as f64).sqrt()));
        Self {
            enc1,
            enc2,
            enc3,
            dec3,
            ada3,
            dec2,
            ada2,
            dec1,
            ada1,
            to_rgb,
            params: pb.build(seed),
        }
    }

    pub fn forward(&self, x: &Tensor3, s: &[f64]) -> (Tensor3, GeneratorCache) {
        let p = &self.params;
        let x0 = ops::avg_pool2(x);
        let (z1, cols1) = self.enc1.forward(p, &x0);
        let a1 = leaky_relu(&z1);
        let (z2, cols2) = self.enc2.forward(p, &ops::avg_pool2(&a1));
        let a2 = leaky_relu(&z2);
        let (z3, cols3) = self.enc3.forward(p, &ops::avg_pool2(&a2));
        let a3 = leaky_relu(&z3);

        let (u3, cols_d3) = self.dec3.forward(p, &a3);
        let (n3, ada3) = self.ada3.forward(p, &u3, s);
        let h3 = leaky_relu(&n3);

        let (mut u2, cols_d2) = self.dec2.forward(p, &ops::upsample2(&h3));
        u2.add_assign(&a2);
        let (n2, ada2) = self.ada2.forward(p, &u2, s);
        let h2 = leaky_relu(&n2);

        let (mut u1, cols_d1) = self.dec1.forward(p, &ops::upsample2(&h2));
        u1.add_assign(&a1);
        let (n1, ada1) = self.ada1.forward(p, &u1, s);
        let h1 = leaky_relu(&n1);

        let (delta, cols_out) = self.to_rgb.forward(p, &ops::upsample2(&h1));
        let mut out = delta;
        for (o, &xv) in out.data.iter_mut().zip(&x.data) {
            let xc = xv.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
            *o = ops::sigmoid(*o + (xc / (1.0 - xc)).ln());
        }
        let cache = GeneratorCache {
            x: x.clone(),
            cols1,
            z1,
            cols2,
            z2,
            cols3,
            z3,
            cols_d3,
            ada3,
            n3,
            cols_d2,
            ada2,
            n2,
            cols_d1,
            ada1,
            n1,
            cols_out,
            style: s.to_vec(),
            out: out.clone(),
        };
        (out, cache)
    }

    pub fn generate(&self, x: &Tensor3, s: &[f64]) -> Tensor3 {
        self.forward(x, s).0
    }

    /// Returns `(dL/dx, dL/ds)`; `dL/dx` is `None` unless `need_dx`.
    pub fn backward(
        &self,
        cache: &GeneratorCache,
        dout: &Tensor3,
        mut g: Option<&mut [f64]>,
        need_dx: bool,
    ) -> (Option<Tensor3>, Vec<f64>) {
        let p = &self.params;
        let c = cache;
        let mut dpre = dout.clone();
        let mut dx_skip = need_dx.then(|| dout.zeros_like());
        for i in 0..dpre.data.len() {
            let o = c.out.data[i];
            dpre.data[i] *= o * (1.0 - o);
            if let Some(dxs) = dx_skip.as_mut() {
                let xv = c.x.data[i];
                if xv > LOGIT_CLAMP && xv < 1.0 - LOGIT_CLAMP {
                    dxs.data[i] = dpre.data[i] / (xv * (1.0 - xv));
                }
            }
        }

        let d_up1 = self.to_rgb.backward(p, &c.cols_out, &dpre, g.as_deref_mut(), true).unwrap();
        let dn1 = leaky_relu_backward(&c.n1, &ops::upsample2_backward(&d_up1));
        let (du1, ds1) = self.ada1.backward(p, &c.ada1, &c.style, &dn1, g.as_deref_mut());
        let mut da1 = du1.clone();

        let d_up2 = self.dec1.backward(p, &c.cols_d1, &du1, g.as_deref_mut(), true).unwrap();
        let dn2 = leaky_relu_backward(&c.n2, &ops::upsample2_backward(&d_up2));
        let (du2, ds2) = self.ada2.backward(p, &c.ada2, &c.style, &dn2, g.as_deref_mut());
        let mut da2 = du2.clone();

        let d_up3 = self.dec2.backward(p, &c.cols_d2, &du2, g.as_deref_mut(), true).unwrap();
        let dn3 = leaky_relu_backward(&c.n3, &ops::upsample2_backward(&d_up3));
        let (du3, ds3) = self.ada3.backward(p, &c.ada3, &c.style, &dn3, g.as_deref_mut());
        let da3 = self.dec3.backward(p, &c.cols_d3, &du3, g.as_deref_mut(), true).unwrap();

        let dz3 = leaky_relu_backward(&c.z3, &da3);
        let dp2 = self.enc3.backward(p, &c.cols3, &dz3, g.as_deref_mut(), true).unwrap();
        da2.add_assign(&ops::avg_pool2_backward(&dp2, c.z2.h, c.z2.w));
        let dz2 = leaky_relu_backward(&c.z2, &da2);
        let dp1 = self.enc2.backward(p, &c.cols2, &dz2, g.as_deref_mut(), true).unwrap();
        da1.add_assign(&ops::avg_pool2_backward(&dp1, c.z1.h, c.z1.w));
        let dz1 = leaky_relu_backward(&c.z1, &da1);
        let dx0 = self.enc1.backward(p, &c.cols1, &dz1, g, need_dx);

        let ds: Vec<f64> = ds1.iter().zip(&ds2).zip(&ds3).map(|((a, b), c)| a + b + c).collect();
        let dx = dx_skip.map(|mut dxs| {
            let dx0 = dx0.expect("input gradient requested");
            dxs.add_assign(&ops::avg_pool2_backward(&dx0, c.x.h, c.x.w));
            dxs
        });
        (dx, ds)
    }
}

// ---------------------------------------------------------------- trunk heads

fn image_trunk(pb: &mut ParamBuilder, arch: &ArchConfig) -> ConvTrunk {
    let c = arch.base_channels;
    ConvTrunk::new(pb, 3, &[c, 2 * c, 2 * c], &[true, true, true], 1)
}

fn trunk_features(arch: &ArchConfig, trunk: &ConvTrunk) -> usize {
    let (c, h, w) = trunk.output_shape(arch.image_size, arch.image_size);
    c * h * w
}

/// Shared shape of the discriminator and style encoder: a conv trunk
/// followed by one linear layer holding all L heads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiHead {
    trunk: ConvTrunk,
    head: Linear,
    pub head_dim: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MultiHeadCache {
    trunk: TrunkCache,
    features: Tensor3,
}

impl MultiHead {
    fn new(arch: &ArchConfig, head_dim: usize, seed: u64) -> Self {
        let mut pb = ParamBuilder::new();
        let trunk = image_trunk(&mut pb, arch);
        let nf = trunk_features(arch, &trunk);
        let head = Linear::with_init(
            &mut pb,
            nf,
            arch.levels * head_dim,
            Init::Uniform((1.0 / nf as f64).sqrt()),
            Init::Zeros,
        );
        Self {
            trunk,
            head,
            head_dim,
            params: pb.build(seed),
        }
    }

    /// All heads, flat `[L * head_dim]`.
    pub fn forward(&self, x: &Tensor3) -> (Vec<f64>, MultiHeadCache) {
        let (features, trunk) = self.trunk.forward(&self.params, x);
        let out = self.head.forward(&self.params, &features.data);
        (out, MultiHeadCache { trunk, features })
    }

    /// Back-propagate a gradient on head `level` (1-based) only.
    pub fn backward_head(
        &self,
        cache: &MultiHeadCache,
        level: usize,
        dhead: &[f64],
        mut g: Option<&mut [f64]>,
        need_dx: bool,
    ) -> Option<Tensor3> {
        let mut dout = vec![0.0; self.head.output];
        dout[(level - 1) * self.head_dim..level * self.head_dim].copy_from_slice(dhead);
        let dfeat = self.head.backward(&self.params, &cache.features.data, &dout, g.as_deref_mut());
        let f = &cache.features;
        let dfeat = Tensor3::from_vec(f.c, f.h, f.w, dfeat);
        self.trunk.backward(&self.params, &cache.trunk, dfeat, g, need_dx)
    }

    pub fn head<'a>(&self, all: &'a [f64], level: usize) -> &'a [f64] {
        &all[(level - 1) * self.head_dim..level * self.head_dim]
    }
}

/// Real/fake discriminator with one logit per level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Discriminator(pub MultiHead);

impl Discriminator {
    pub fn new(arch: &ArchConfig, seed: u64) -> Self {
        Self(MultiHead::new(arch, 1, seed))
    }

    pub fn logit(&self, x: &Tensor3, level: usize) -> f64 {
        let (all, _) = self.0.forward(x);
        all[level - 1]
    }
}

/// Style encoder with one `d`-dimensional head per level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StyleEncoder(pub MultiHead);

impl StyleEncoder {
    pub fn new(arch: &ArchConfig, seed: u64) -> Self {
        Self(MultiHead::new(arch, arch.style_dim, seed))
    }

    pub fn encode(&self, x: &Tensor3, level: usize) -> Vec<f64> {
        let (all, _) = self.0.forward(x);
        self.0.head(&all, level).to_vec()
    }
}

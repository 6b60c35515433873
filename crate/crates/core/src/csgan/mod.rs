//! Continuous-severity GAN: mapping network F, generator G, style encoder E
//! and discriminator D, trained with adversarial, style-reconstruction,
//! diversity, cycle-consistency and order losses.

mod checkpoint;
pub mod losses;
pub mod networks;
mod train;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use losses::{adversarial_loss, cycle_loss, diversity_loss, mean_abs_diff, style_reconstruction_loss, Side};
pub use networks::{ArchConfig, Discriminator, Generator, MappingNetwork, StyleEncoder};
pub use train::{
    discriminator_objective, discriminator_step, generator_objective, generator_step, train_csgan, GanSample,
    GeneratorGrads, GeneratorLosses, LossRow, LossWeights, TrainedGan, LOSS_LOG_HEADER,
};

use crate::error::{domain, Result};
use crate::nn::Tensor3;
use crate::rng;
use crate::stylespace::{interpolate_style, linearity_residual, StyleSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub lambda_sty: f64,
    pub lambda_ds: f64,
    pub lambda_cyc: f64,
    pub lambda_order: f64,
    /// Iterations over which `lambda_ds` decays linearly to zero; 0 means "all of training".
    pub ds_decay_iters: usize,
    pub iterations: usize,
    pub batch_size: usize,
    /// Learning rate of G, E and D.
    pub lr: f64,
    /// Learning rate of the mapping network F.
    pub f_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub checkpoint_every: usize,
    pub style_dim: usize,
    pub latent_dim: usize,
    pub mapping_hidden: usize,
    pub base_channels: usize,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            lambda_sty: 1.0,
            lambda_ds: 1.0,
            lambda_cyc: 1.0,
            lambda_order: 1.0,
            ds_decay_iters: 0,
            iterations: 5000,
            batch_size: 8,
            lr: 1e-3,
            f_lr: 1e-3,
            beta1: 0.0,
            beta2: 0.99,
            checkpoint_every: 1000,
            style_dim: 16,
            latent_dim: 8,
            mapping_hidden: 32,
            base_channels: 8,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn arch(&self, image_size: usize, levels: usize) -> ArchConfig {
        ArchConfig {
            image_size,
            levels,
            style_dim: self.style_dim,
            latent_dim: self.latent_dim,
            mapping_hidden: self.mapping_hidden,
            base_channels: self.base_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [self.lambda_sty, self.lambda_ds, self.lambda_cyc, self.lambda_order];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return crate::error::config("loss weights must be finite and non-negative");
        }
        if self.batch_size == 0 || !(self.lr > 0.0) || !(self.f_lr > 0.0) {
            return crate::error::config("batch_size, lr and f_lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return crate::error::config("Adam betas must lie in [0, 1)");
        }
        Ok(())
    }

    /// Diversity weight at iteration `iter`.
    pub fn lambda_ds_at(&self, iter: usize) -> f64 {
        let span = if self.ds_decay_iters == 0 { self.iterations } else { self.ds_decay_iters };
        if span == 0 {
            return 0.0;
        }
        self.lambda_ds * (1.0 - iter as f64 / span as f64).max(0.0)
    }
}

/// A latent code `z ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub id: u64,
    pub z: Vec<f64>,
}

impl LatentCode {
    pub fn sample(dim: usize, seed: u64, id: u64) -> Self {
        let mut r = rng::rng_for(seed, "latent", id);
        Self {
            id,
            z: (0..dim).map(|_| StandardNormal.sample(&mut r)).collect(),
        }
    }
}

/// The four trained networks.
#[derive(Debug, Clone)]
pub struct CsGan {
    pub arch: ArchConfig,
    pub mapping: MappingNetwork,
    pub generator: Generator,
    pub encoder: StyleEncoder,
    pub discriminator: Discriminator,
}

impl CsGan {
    pub fn new(arch: ArchConfig, seed: u64) -> Self {
        Self {
            arch,
            mapping: MappingNetwork::new(&arch, rng::derive_tagged(seed, "init", 0)),
            generator: Generator::new(&arch, rng::derive_tagged(seed, "init", 1)),
            encoder: StyleEncoder::new(&arch, rng::derive_tagged(seed, "init", 2)),
            discriminator: Discriminator::new(&arch, rng::derive_tagged(seed, "init", 3)),
        }
    }

    pub fn style_set(&self, latent: &LatentCode) -> StyleSet {
        StyleSet::from_flat(&self.mapping.styles(&latent.z), self.arch.levels, latent.id)
    }

    /// `G(x, s_{y_real})` with the style interpolated from `F(z)`.
    pub fn generate(&self, x: &Tensor3, y_real: f64, latent: &LatentCode) -> Result<Tensor3> {
        if x.shape() != (3, self.arch.image_size, self.arch.image_size) {
            return domain(format!("generator expects 3x{0}x{0} images, got {1:?}", self.arch.image_size, x.shape()));
        }
        if latent.z.len() != self.arch.latent_dim {
            return domain(format!("latent has {} dims, model expects {}", latent.z.len(), self.arch.latent_dim));
        }
        let style = interpolate_style(&self.style_set(latent), y_real)?;
        Ok(self.generator.generate(x, style.as_slice()))
    }

    /// Mean linearity residual of `F` over `n` fresh latents.
    pub fn mean_linearity_residual(&self, n: usize, seed: u64) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..n {
            let latent = LatentCode::sample(self.arch.latent_dim, seed, i as u64);
            total += linearity_residual(&self.style_set(&latent))?;
        }
        Ok(total / n as f64)
    }
}

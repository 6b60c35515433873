//! The csGAN loss terms, evaluated directly from their definitions.
//!
//! Training uses fused forward/backward code in `train`; these functions are
//! the reference evaluations the gradient checks compare against.

use super::networks::{Generator, StyleEncoder};
use crate::nn::ops::softplus;
use crate::nn::Tensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Generator,
    Discriminator,
}

/// Non-saturating logistic GAN loss.
///
/// Discriminator: `softplus(−real) + softplus(fake)`; generator: `softplus(−fake)`.
pub fn adversarial_loss(real_logit: f64, fake_logit: f64, side: Side) -> f64 {
    match side {
        Side::Discriminator => softplus(-real_logit) + softplus(fake_logit),
        Side::Generator => softplus(-fake_logit),
    }
}

/// Mean absolute difference of two equally long slices.
pub fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// `mean_j |E(fake, y)_j − target_j|`.
pub fn style_reconstruction_loss(encoder: &StyleEncoder, fake: &Tensor3, level: usize, target: &[f64]) -> f64 {
    mean_abs_diff(&encoder.encode(fake, level), target)
}

/// `−mean |G(x, s_a) − G(x, s_b)|`; never positive.
pub fn diversity_loss(generator: &Generator, x: &Tensor3, s_a: &[f64], s_b: &[f64]) -> f64 {
    -mean_abs_diff(&generator.generate(x, s_a).data, &generator.generate(x, s_b).data)
}

/// `mean |G(G(x, s_target), s_back) − x|`.
pub fn cycle_loss(generator: &Generator, x: &Tensor3, s_target: &[f64], s_back: &[f64]) -> f64 {
    let fake = generator.generate(x, s_target);
    mean_abs_diff(&generator.generate(&fake, s_back).data, &x.data)
}

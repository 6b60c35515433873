//! Continuous severity data augmentation.
//!
//! A conditional GAN whose mapping network emits one style vector per
//! severity level, trained with an order loss that keeps consecutive styles
//! collinear, so images can be generated at real-valued severities by
//! interpolating styles. Generated images then train a severity regressor
//! through a listwise ranking loss while real images keep an absolute MSE
//! loss.
//!
//! Module map:
//! - [`data`]: synthetic ordinal-image dataset, severity oracle, manifests, splits
//! - [`stylespace`]: style vectors, order loss, interpolation
//! - [`csgan`]: mapping network, generator, style encoder, discriminator and training
//! - [`augmentor`]: ε-grid sweeps producing the augmented dataset
//! - [`regressor`]: MSE + ListNet severity regression
//! - [`evalkit`]: quantised metrics, quartiles, paired t-tests, cross-validation
//! - [`config`] / [`pipeline`]: experiment configuration and the command implementations

pub mod augmentor;
pub mod config;
pub mod csgan;
pub mod data;
pub mod error;
pub mod evalkit;
pub mod fsutil;
pub mod nn;
pub mod parallel;
pub mod pipeline;
pub mod regressor;
pub mod rng;
pub mod stylespace;

pub use error::{CsdaError, Result};

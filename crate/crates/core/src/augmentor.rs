//! Builds the generated dataset by sweeping real-valued severity levels on
//! an ε-grid, one training-split source image per sampled latent.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::csgan::{CsGan, LatentCode};
use crate::data::{read_png, write_png, LabeledImage};
use crate::error::{config, CsdaError, Result};
use crate::fsutil::{create_dir, write_csv};
use crate::nn::Tensor3;
use crate::{parallel, rng};

pub const AUGMENTED_MANIFEST: &str = "augmented.csv";
pub const AUGMENTED_IMAGE_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub epsilon: f64,
    pub num_latents: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            num_latents: 250,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self, levels: usize) -> Result<()> {
        if self.num_latents == 0 {
            return config("num_latents must be positive");
        }
        level_grid(levels, self.epsilon).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub pixels: Tensor3,
    pub y_prime: f64,
    pub source_image_id: String,
    pub latent_id: u64,
}

/// One row of the generated-dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedEntry {
    pub image_path: String,
    pub y_prime: f64,
    pub source_image_id: String,
    pub latent_id: u64,
}

/// `[1, 1+ε, …, L]`. `1/ε` must be a whole number, so every integer level is on the grid.
pub fn level_grid(levels: usize, epsilon: f64) -> Result<Vec<f64>> {
    if levels < 2 {
        return config(format!("a level grid needs L >= 2, got {levels}"));
    }
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon <= 1.0) {
        return config(format!("epsilon must lie in (0, 1], got {epsilon}"));
    }
    let per_level = (1.0 / epsilon).round();
    if (1.0 / epsilon - per_level).abs() > 1e-9 {
        return config(format!("epsilon {epsilon} does not divide 1"));
    }
    let m = per_level as usize;
    Ok((0..=(levels - 1) * m).map(|i| 1.0 + i as f64 / m as f64).collect())
}

/// Samples `num_latents` latents; each picks one source image uniformly from
/// `sources` and is rendered at every grid level. Output is ordered by
/// latent, then level.
pub fn build_augmented_dataset(model: &CsGan, sources: &[LabeledImage], cfg: &AugmentConfig) -> Result<Vec<GeneratedSample>> {
    let grid = level_grid(model.arch.levels, cfg.epsilon)?;
    cfg.validate(model.arch.levels)?;
    if sources.is_empty() {
        return config("no source images to augment");
    }
    let per_latent = parallel::try_map_range(cfg.num_latents, |i| {
        let id = i as u64;
        let latent = LatentCode::sample(model.arch.latent_dim, rng::derive_tagged(cfg.seed, "aug-latent", 0), id);
        let source = &sources[rng::rng_for(cfg.seed, "aug-source", id).random_range(0..sources.len())];
        grid.iter()
            .map(|&y| {
                Ok(GeneratedSample {
                    pixels: model.generate(&source.pixels, y, &latent)?,
                    y_prime: y,
                    source_image_id: source.image_id.clone(),
                    latent_id: id,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_latent.into_iter().flatten().collect())
}

fn entry_for(s: &GeneratedSample, grid: &[f64]) -> AugmentedEntry {
    let k = grid.iter().position(|g| *g == s.y_prime).unwrap_or(usize::MAX);
    AugmentedEntry {
        image_path: format!("{AUGMENTED_IMAGE_DIR}/z{:05}_l{k:02}.png", s.latent_id),
        y_prime: s.y_prime,
        source_image_id: s.source_image_id.clone(),
        latent_id: s.latent_id,
    }
}

/// Write PNGs and the manifest under `dir`. Existing files are never replaced.
pub fn write_augmented(dir: &Path, samples: &[GeneratedSample], levels: usize, epsilon: f64) -> Result<Vec<AugmentedEntry>> {
    let grid = level_grid(levels, epsilon)?;
    if let Some(bad) = samples.iter().find(|s| !grid.contains(&s.y_prime)) {
        return config(format!("y' = {} is not on the ε = {epsilon} grid", bad.y_prime));
    }
    create_dir(&dir.join(AUGMENTED_IMAGE_DIR))?;
    let entries: Vec<AugmentedEntry> = samples.iter().map(|s| entry_for(s, &grid)).collect();
    parallel::try_map_range(samples.len(), |i| {
        let path = dir.join(&entries[i].image_path);
        if path.exists() {
            return Err(CsdaError::ArtifactExists(path));
        }
        write_png(&path, &samples[i].pixels)
    })?;
    write_csv(&dir.join(AUGMENTED_MANIFEST), &entries)?;
    Ok(entries)
}

/// Read a generated dataset written by [`write_augmented`].
pub fn load_augmented(dir: &Path) -> Result<Vec<GeneratedSample>> {
    let path = dir.join(AUGMENTED_MANIFEST);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| CsdaError::load(&path, e))?;
    let entries = reader
        .deserialize::<AugmentedEntry>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CsdaError::load(&path, e))?;
    parallel::try_map_range(entries.len(), |i| {
        let e = &entries[i];
        Ok(GeneratedSample {
            pixels: read_png(&dir.join(&e.image_path))?,
            y_prime: e.y_prime,
            source_image_id: e.source_image_id.clone(),
            latent_id: e.latent_id,
        })
    })
}

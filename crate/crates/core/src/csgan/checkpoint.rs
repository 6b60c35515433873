use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchConfig, CsGan, GanConfig};
use crate::fsutil::{read_json, write_json};
use crate::error::{CsdaError, Result};

const FORMAT: &str = "csda-csgan/1";

/// On-disk form of a trained csGAN: configuration echo plus all four parameter blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub iteration: usize,
    pub config: GanConfig,
    pub arch: ArchConfig,
    pub mapping: Vec<f64>,
    pub generator: Vec<f64>,
    pub style_encoder: Vec<f64>,
    pub discriminator: Vec<f64>,
}

pub fn save_checkpoint(path: &Path, model: &CsGan, config: &GanConfig, iteration: usize) -> Result<()> {
    if path.exists() {
        return Err(CsdaError::ArtifactExists(path.to_path_buf()));
    }
    let ckpt = Checkpoint {
        format: FORMAT.into(),
        iteration,
        config: config.clone(),
        arch: model.arch,
        mapping: model.mapping.params.clone(),
        generator: model.generator.params.clone(),
        style_encoder: model.encoder.0.params.clone(),
        discriminator: model.discriminator.0.params.clone(),
    };
    write_json(path, &ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<(CsGan, Checkpoint)> {
    if !path.exists() {
        return Err(CsdaError::load(path, "checkpoint not found"));
    }
    let ckpt: Checkpoint = read_json(path)?;
    if ckpt.format != FORMAT {
        return Err(CsdaError::load(path, format!("unknown checkpoint format {:?}", ckpt.format)));
    }
    ckpt.arch.validate().map_err(|e| CsdaError::load(path, e))?;
    let mut model = CsGan::new(ckpt.arch, 0);
    let blocks: [(&mut Vec<f64>, &Vec<f64>, &str); 4] = [
        (&mut model.mapping.params, &ckpt.mapping, "mapping"),
        (&mut model.generator.params, &ckpt.generator, "generator"),
        (&mut model.encoder.0.params, &ckpt.style_encoder, "style_encoder"),
        (&mut model.discriminator.0.params, &ckpt.discriminator, "discriminator"),
    ];
    for (dst, src, name) in blocks {
        if dst.len() != src.len() {
            return Err(CsdaError::load(
                path,
                format!("{name} has {} parameters, architecture expects {}", src.len(), dst.len()),
            ));
        }
        if src.iter().any(|v| !v.is_finite()) {
            return Err(CsdaError::load(path, format!("{name} contains non-finite parameters")));
        }
        dst.copy_from_slice(src);
    }
    Ok((model, ckpt))
}

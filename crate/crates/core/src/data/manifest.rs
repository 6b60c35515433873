use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::imageio::{read_png, write_png};
use super::oracle::Calibration;
use super::synthetic::{label_for, synthetic_pixels, CHANNELS};
use super::{DatasetConfig, LabeledImage};
use crate::error::{config, CsdaError, Result};
use crate::fsutil::{read_json, write_json};
use crate::{parallel, rng};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const INFO_FILE: &str = "dataset.json";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub image_path: String,
    pub label: usize,
    pub subject_id: String,
    pub true_severity: f64,
}

impl ManifestEntry {
    /// File stem of the image path.
    pub fn image_id(&self) -> String {
        Path::new(&self.image_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.image_path.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_counts: Vec<usize>,
    pub levels: usize,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, levels: usize) -> Result<Self> {
        let mut class_counts = vec![0; levels];
        for e in &entries {
            if e.label == 0 || e.label > levels {
                return config(format!("label {} outside 1..={levels} for {}", e.label, e.image_path));
            }
            class_counts[e.label - 1] += 1;
        }
        Ok(Self {
            entries,
            class_counts,
            levels,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| CsdaError::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path, levels: usize) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| CsdaError::load(path, e))?;
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["image_path", "label", "subject_id", "true_severity"] {
            return Err(CsdaError::load(path, format!("unexpected manifest header {headers:?}")));
        }
        let entries = r.deserialize().collect::<std::result::Result<Vec<ManifestEntry>, _>>()?;
        Self::new(entries, levels)
    }
}

/// Shape and provenance of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub levels: usize,
    pub image_size: usize,
    pub config: DatasetConfig,
}

/// A manifest together with its decoded images (same order).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub info: DatasetInfo,
    pub manifest: DatasetManifest,
    pub images: Vec<LabeledImage>,
}

impl Dataset {
    /// Generate the synthetic dataset described by `cfg`.
    ///
    /// Entries are shuffled before subjects receive contiguous blocks, so each
    /// subject holds a random mix of levels.
    pub fn build(cfg: &DatasetConfig) -> Result<Self> {
        let levels = cfg.levels();
        if levels < 2 {
            return config("dataset needs at least 2 levels");
        }
        if cfg.counts.iter().any(|&c| c == 0) {
            return config("every level needs at least one image");
        }
        let total = cfg.total();
        if cfg.subjects < 3 || cfg.subjects > total {
            return config(format!(
                "need between 3 and {total} subjects for {total} images, got {}",
                cfg.subjects
            ));
        }

        let mut labels: Vec<usize> = cfg
            .counts
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| std::iter::repeat_n(i + 1, n))
            .collect();
        labels.shuffle(&mut rng::rng_for(cfg.seed, "dataset-order", 0));

        let mut sev_rng = rng::rng_for(cfg.seed, "dataset-severity", 0);
        let severities: Vec<f64> = labels
            .iter()
            .map(|&y| {
                let lo = (y as f64 - 0.5).max(1.0);
                let hi = (y as f64 + 0.5).min(levels as f64);
                sev_rng.random_range(lo..hi)
            })
            .collect();

        let images = parallel::try_map_range(total, |i| {
            let seed = rng::derive_tagged(cfg.seed, "dataset-image", i as u64);
            let pixels = synthetic_pixels(severities[i], seed, cfg.image_size, levels)?;
            Ok::<_, CsdaError>(LabeledImage {
                pixels,
                label: labels[i],
                subject_id: format!("S{:03}", i * cfg.subjects / total),
                true_severity: severities[i],
                image_id: format!("img_{i:05}"),
            })
        })?;
        debug_assert!(images.iter().all(|im| im.label == label_for(im.true_severity, levels)));

        let entries = images
            .iter()
            .map(|im| ManifestEntry {
                image_path: format!("{IMAGE_DIR}/{}.png", im.image_id),
                label: im.label,
                subject_id: im.subject_id.clone(),
                true_severity: im.true_severity,
            })
            .collect();
        Ok(Self {
            info: DatasetInfo {
                levels,
                image_size: cfg.image_size,
                config: cfg.clone(),
            },
            manifest: DatasetManifest::new(entries, levels)?,
            images,
        })
    }

    pub fn levels(&self) -> usize {
        self.info.levels
    }

    /// Write images, `manifest.csv`, `dataset.json` and `calibration.json` into a fresh `dir`.
    pub fn write(&self, dir: &Path, calibration: &Calibration) -> Result<()> {
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            return Err(CsdaError::ArtifactExists(manifest_path));
        }
        let img_dir = dir.join(IMAGE_DIR);
        fs::create_dir_all(&img_dir).map_err(|e| CsdaError::io(&img_dir, e))?;
        parallel::try_map_range(self.images.len(), |i| {
            write_png(&dir.join(&self.manifest.entries[i].image_path), &self.images[i].pixels)
        })?;
        self.manifest.write_csv(&manifest_path)?;
        write_json(&dir.join(INFO_FILE), &self.info)?;
        write_json(&dir.join(CALIBRATION_FILE), calibration)?;
        Ok(())
    }

    /// Load a dataset directory, checking that every image decodes to the declared shape.
    pub fn load(dir: &Path) -> Result<Self> {
        let info: DatasetInfo = read_json(&dir.join(INFO_FILE))?;
        let manifest = DatasetManifest::read_csv(&dir.join(MANIFEST_FILE), info.levels)?;
        let images = parallel::try_map_range(manifest.len(), |i| {
            let e = &manifest.entries[i];
            let path = dir.join(&e.image_path);
            let pixels = read_png(&path)?;
            if pixels.shape() != (CHANNELS, info.image_size, info.image_size) {
                return Err(CsdaError::load(&path, format!("shape {:?} does not match dataset", pixels.shape())));
            }
            Ok(LabeledImage {
                pixels,
                label: e.label,
                subject_id: e.subject_id.clone(),
                true_severity: e.true_severity,
                image_id: e.image_id(),
            })
        })?;
        Ok(Self { info, manifest, images })
    }

    pub fn calibration_path(dir: &Path) -> PathBuf {
        dir.join(CALIBRATION_FILE)
    }
}

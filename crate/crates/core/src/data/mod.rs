//! Synthetic ordinal-image dataset, severity oracle, manifests and the
//! sampling protocol (subject-disjoint splits, oversampling, classic
//! augmentation).

mod augment;
mod imageio;
mod manifest;
mod oracle;
mod split;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use augment::{classic_augment, oversample_balance, ClassicTransform};
pub use imageio::{read_png, write_png};
pub use manifest::{Dataset, DatasetInfo, DatasetManifest, ManifestEntry};
pub use oracle::{calibration_grid, oracle_severity, Calibration, CALIBRATION_SEEDS};
pub use split::{split_subject_disjoint, SplitAssignment};
pub use synthetic::{
    blob_amplitude, blob_count, generate_synthetic_image, label_for, lesion_energy, synthetic_pixels, CHANNELS,
};

use crate::nn::Tensor3;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub pixels: Tensor3,
    /// Discrete level in `1..=L`.
    pub label: usize,
    pub subject_id: String,
    /// Ground-truth continuous severity; never shown to training code.
    pub true_severity: f64,
    pub image_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Images per level, index 0 = level 1.
    pub counts: Vec<usize>,
    pub subjects: usize,
    pub image_size: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    /// 1/5-scale copy of a 6678/1995/1395/197 class split over 80 subjects.
    fn default() -> Self {
        Self {
            counts: vec![1336, 399, 279, 40],
            subjects: 80,
            image_size: 64,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn levels(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

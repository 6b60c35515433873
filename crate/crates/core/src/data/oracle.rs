//! Severity oracle: the calibrated inverse of mean lesion energy.

use serde::{Deserialize, Serialize};

use super::synthetic::{lesion_energy, synthetic_pixels, CHANNELS};
use crate::error::{domain, Result};
use crate::nn::Tensor3;
use crate::{parallel, rng};

pub const CALIBRATION_SEEDS: usize = 100;
const CALIBRATION_SEED: u64 = 0x5E7E_41C0;

/// Mean lesion energy at each grid severity. Strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub image_size: usize,
    pub levels: usize,
    /// `(severity, mean_energy)` pairs, severities ascending from 1 to `levels` in steps of 0.5.
    pub table: Vec<(f64, f64)>,
}

/// Frozen table for 64×64 images with 4 levels (see `frozen_table_matches_recomputation`).
const FROZEN_64_L4: [(f64, f64); 7] = [
    (1.0, 0.0),
    (1.5, 1.7634930977658996),
    (2.0, 7.523873611411494),
    (2.5, 22.972178921812034),
    (3.0, 40.66840718723093),
    (3.5, 75.39367687515227),
    (4.0, 107.72503720897527),
];

pub fn calibration_grid(levels: usize) -> Vec<f64> {
    (0..=2 * (levels - 1)).map(|i| 1.0 + 0.5 * i as f64).collect()
}

impl Calibration {
    /// Recompute the table by generating `CALIBRATION_SEEDS` images per grid severity.
    pub fn compute(image_size: usize, levels: usize) -> Result<Self> {
        let grid = calibration_grid(levels);
        let mut table = Vec::with_capacity(grid.len());
        for (gi, &v) in grid.iter().enumerate() {
            let energies = parallel::try_map_range(CALIBRATION_SEEDS, |s| {
                let seed = rng::derive_tagged(CALIBRATION_SEED, "calibration", (gi * CALIBRATION_SEEDS + s) as u64);
                synthetic_pixels(v, seed, image_size, levels).map(|img| lesion_energy(&img))
            })?;
            table.push((v, energies.iter().sum::<f64>() / CALIBRATION_SEEDS as f64));
        }
        let cal = Self {
            image_size,
            levels,
            table,
        };
        cal.validate()?;
        Ok(cal)
    }

    /// The frozen table when one exists for this shape, otherwise a fresh computation.
    pub fn for_shape(image_size: usize, levels: usize) -> Result<Self> {
        if image_size == 64 && levels == 4 {
            return Ok(Self {
                image_size,
                levels,
                table: FROZEN_64_L4.to_vec(),
            });
        }
        Self::compute(image_size, levels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.table.len() < 2 {
            return domain("calibration table needs at least two points");
        }
        for w in self.table.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return domain(format!("calibration table not strictly increasing at {:?}", w));
            }
        }
        Ok(())
    }

    /// Severity whose calibrated mean energy equals `energy`, clamped to `[1, L]`.
    pub fn severity_for_energy(&self, energy: f64) -> f64 {
        let t = &self.table;
        if !(energy > t[0].1) {
            return t[0].0;
        }
        let last = t[t.len() - 1];
        if energy >= last.1 {
            return last.0;
        }
        let i = t.partition_point(|&(_, e)| e <= energy);
        let (v0, e0) = t[i - 1];
        let (v1, e1) = t[i];
        v0 + (v1 - v0) * (energy - e0) / (e1 - e0)
    }

    pub fn oracle_severity(&self, pixels: &Tensor3) -> Result<f64> {
        if pixels.shape() != (CHANNELS, self.image_size, self.image_size) {
            return domain(format!(
                "oracle expects {}x{}x{}, got {:?}",
                CHANNELS,
                self.image_size,
                self.image_size,
                pixels.shape()
            ));
        }
        Ok(self.severity_for_energy(lesion_energy(pixels)))
    }
}

/// Oracle severity under the calibration for the image's own shape.
pub fn oracle_severity(pixels: &Tensor3, levels: usize) -> Result<f64> {
    if pixels.h != pixels.w {
        return domain("oracle expects square images");
    }
    Calibration::for_shape(pixels.h, levels)?.oracle_severity(pixels)
}

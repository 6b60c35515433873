use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::metrics::{kendall_tau, spearman};
use crate::augmentor::{level_grid, GeneratedSample};
use crate::csgan::{CsGan, LatentCode};
use crate::data::{Calibration, LabeledImage};
use crate::error::{config, Result};
use crate::{parallel, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controllability {
    pub grid: Vec<f64>,
    pub mean_spearman: f64,
    /// Spearman ρ of each (source, latent) pair.
    pub per_pair: Vec<f64>,
}

/// Spearman correlation between requested levels on the ε-grid and the
/// oracle severity of the generated images, for `pairs` seeded (source, latent) pairs.
pub fn severity_controllability(
    model: &CsGan,
    sources: &[&LabeledImage],
    calibration: &Calibration,
    epsilon: f64,
    pairs: usize,
    seed: u64,
) -> Result<Controllability> {
    if sources.is_empty() || pairs == 0 {
        return config("controllability needs source images and at least one pair");
    }
    let grid = level_grid(model.arch.levels, epsilon)?;
    let per_pair = parallel::try_map_range(pairs, |p| {
        let src = sources[rng::rng_for(seed, "control-source", p as u64).random_range(0..sources.len())];
        let latent = LatentCode::sample(model.arch.latent_dim, rng::derive_tagged(seed, "control-latent", 0), p as u64);
        let sev = grid
            .iter()
            .map(|&y| calibration.oracle_severity(&model.generate(&src.pixels, y, &latent)?))
            .collect::<Result<Vec<_>>>()?;
        Ok::<_, crate::CsdaError>(spearman(&grid, &sev))
    })?;
    Ok(Controllability {
        mean_spearman: per_pair.iter().sum::<f64>() / pairs as f64,
        grid,
        per_pair,
    })
}

/// Kendall τ between `y'` and oracle severity within each latent of a generated dataset.
pub fn per_latent_kendall(samples: &[GeneratedSample], calibration: &Calibration) -> Result<BTreeMap<u64, f64>> {
    let severities = parallel::try_map_range(samples.len(), |i| calibration.oracle_severity(&samples[i].pixels))?;
    let mut groups: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (s, sev) in samples.iter().zip(severities) {
        let g = groups.entry(s.latent_id).or_default();
        g.0.push(s.y_prime);
        g.1.push(sev);
    }
    Ok(groups.into_iter().map(|(id, (y, sev))| (id, kendall_tau(&y, &sev))).collect())
}

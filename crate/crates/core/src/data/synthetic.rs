//! Procedural ordinal images with a pixel-recoverable severity.
//!
//! Background: blurred uniform noise mapped into [0.3, 0.6] with a greenish
//! tint, so `red - mean(green, blue)` is negative everywhere. Lesions:
//! `round(3 (v - 1))` Gaussian blobs of amplitude `0.1 + 0.1 (v - 1)` added
//! to the red channel. Lesion energy (see [`lesion_energy`]) therefore grows
//! with both blob count and amplitude.

use rand::Rng as _;

use super::LabeledImage;
use crate::error::{domain, Result};
use crate::nn::Tensor3;
use crate::rng;

pub const CHANNELS: usize = 3;
const BG_LOW: f64 = 0.3;
const BG_HIGH: f64 = 0.6;
const RED_OFFSET: f64 = -0.06;
const GREEN_OFFSET: f64 = 0.06;
const BLUR: usize = 5;
const SIGMA_RANGE: (f64, f64) = (0.045, 0.05);
const MARGIN: f64 = 0.08;

pub fn blob_count(severity: f64) -> usize {
    (3.0 * (severity - 1.0)).round() as usize
}

pub fn blob_amplitude(severity: f64) -> f64 {
    0.1 + 0.1 * (severity - 1.0)
}

fn check_severity(severity: f64, levels: usize) -> Result<()> {
    if !(severity.is_finite() && severity >= 1.0 && severity <= levels as f64) {
        return domain(format!("severity {severity} outside [1, {levels}]"));
    }
    Ok(())
}

/// Box-blur a single-channel field with a `BLUR × BLUR` window, averaging over the in-bounds part.
fn box_blur(field: &[f64], h: usize, w: usize) -> Vec<f64> {
    let r = (BLUR / 2) as isize;
    let mut out = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut s, mut n) = (0.0, 0usize);
            for yy in (y - r).max(0)..=(y + r).min(h as isize - 1) {
                for xx in (x - r).max(0)..=(x + r).min(w as isize - 1) {
                    s += field[yy as usize * w + xx as usize];
                    n += 1;
                }
            }
            out[y as usize * w + x as usize] = s / n as f64;
        }
    }
    out
}

/// Pixels of a synthetic image at `severity`, deterministic in `(severity, seed, size)`.
pub fn synthetic_pixels(severity: f64, seed: u64, size: usize, levels: usize) -> Result<Tensor3> {
    check_severity(severity, levels)?;
    if size < 8 {
        return domain(format!("image size {size} too small"));
    }
    let (h, w) = (size, size);
    let mut rng = rng::rng(seed);

    let noise: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>()).collect();
    let blurred = box_blur(&noise, h, w);
    let (lo, hi) = blurred
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (hi - lo).max(1e-12);

    let mut img = Tensor3::zeros(CHANNELS, h, w);
    let plane = h * w;
    for (i, &b) in blurred.iter().enumerate() {
        let base = BG_LOW + (BG_HIGH - BG_LOW) * (b - lo) / span;
        img.data[i] = base + RED_OFFSET;
        img.data[plane + i] = base + GREEN_OFFSET;
        img.data[2 * plane + i] = base;
    }

    let amp = blob_amplitude(severity);
    let margin = MARGIN * size as f64;
    for _ in 0..blob_count(severity) {
        let cx = rng.random_range(margin..size as f64 - margin);
        let cy = rng.random_range(margin..size as f64 - margin);
        let sigma = size as f64 * rng.random_range(SIGMA_RANGE.0..SIGMA_RANGE.1);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for y in 0..h {
            let dy = y as f64 + 0.5 - cy;
            for x in 0..w {
                let dx = x as f64 + 0.5 - cx;
                img.data[y * w + x] += amp * (-(dx * dx + dy * dy) * inv).exp();
            }
        }
    }
    img.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(img)
}

/// Quantise a real severity to its discrete level.
pub fn label_for(severity: f64, levels: usize) -> usize {
    (severity.round() as i64).clamp(1, levels as i64) as usize
}

pub fn generate_synthetic_image(severity: f64, seed: u64, size: usize, levels: usize) -> Result<LabeledImage> {
    let pixels = synthetic_pixels(severity, seed, size, levels)?;
    Ok(LabeledImage {
        pixels,
        label: label_for(severity, levels),
        subject_id: String::new(),
        true_severity: severity,
        image_id: format!("syn-{seed}"),
    })
}

/// Σ over pixels of `max(0, red − (green + blue)/2)`.
pub fn lesion_energy(img: &Tensor3) -> f64 {
    let p = img.plane();
    (0..p)
        .map(|i| (img.data[i] - 0.5 * (img.data[p + i] + img.data[2 * p + i])).max(0.0))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn severity_one_has_no_lesions() {
        let img = synthetic_pixels(1.0, 3, 64, 4).unwrap();
        assert_eq!(lesion_energy(&img), 0.0);
        assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = synthetic_pixels(2.5, 7, 64, 4).unwrap();
        let b = synthetic_pixels(2.5, 7, 64, 4).unwrap();
        assert_eq!(a.data, b.data);
        let c = synthetic_pixels(2.5, 8, 64, 4).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn out_of_range_severity_is_a_domain_error() {
        assert!(synthetic_pixels(0.99, 0, 64, 4).is_err());
        assert!(synthetic_pixels(4.01, 0, 64, 4).is_err());
        assert!(synthetic_pixels(f64::NAN, 0, 64, 4).is_err());
    }

    #[test]
    fn blob_schedule() {
        assert_eq!(blob_count(1.0), 0);
        assert_eq!(blob_count(2.0), 3);
        assert_eq!(blob_count(4.0), 9);
        assert!((blob_amplitude(4.0) - 0.4).abs() < 1e-12);
        assert_eq!(label_for(1.49, 4), 1);
        assert_eq!(label_for(3.5, 4), 4);
    }

    #[test]
    fn mean_energy_increases_along_the_grid() {
        let grid: Vec<f64> = (0..7).map(|i| 1.0 + 0.5 * i as f64).collect();
        let means: Vec<f64> = grid
            .iter()
            .map(|&v| {
                (0..100)
                    .map(|s| lesion_energy(&synthetic_pixels(v, 10_000 + s, 64, 4).unwrap()))
                    .sum::<f64>()
                    / 100.0
            })
            .collect();
        for pair in means.windows(2) {
            assert!(pair[1] > pair[0], "{means:?}");
        }
    }
}

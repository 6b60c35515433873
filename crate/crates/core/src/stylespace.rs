//! Style vectors and the geometry of the per-level style sequence.
//!
//! A [`StyleSet`] holds the styles `s_1..s_L` produced from one latent code.
//! The order loss pulls every interior style toward the midpoint of its
//! neighbours; once the sequence is collinear and evenly spaced, a style for
//! any real level in `[1, L]` is obtained by linear interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StyleVector(pub Vec<f64>);

impl StyleVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSet {
    /// `vectors[y - 1]` is the style for level `y`.
    pub vectors: Vec<StyleVector>,
    #[serde(default)]
    pub latent_id: u64,
}

impl StyleSet {
    pub fn new(vectors: Vec<StyleVector>, latent_id: u64) -> Result<Self> {
        let set = Self { vectors, latent_id };
        set.validate()?;
        Ok(set)
    }

    /// Build from a flat `[L * d]` buffer (level-major), as emitted by the mapping network.
    pub fn from_flat(flat: &[f64], levels: usize, latent_id: u64) -> Self {
        assert!(levels > 0 && flat.len() % levels == 0);
        let d = flat.len() / levels;
        Self {
            vectors: flat.chunks(d).map(|c| StyleVector(c.to_vec())).collect(),
            latent_id,
        }
    }

    pub fn levels(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, StyleVector::dim)
    }

    /// Style of integer level `y` (1-based).
    pub fn level(&self, y: usize) -> &StyleVector {
        &self.vectors[y - 1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.vectors.is_empty() {
            return domain("style set is empty");
        }
        let d = self.dim();
        if self.vectors.iter().any(|v| v.dim() != d) {
            return domain("style vectors in a set must share one dimension");
        }
        if !self.vectors.iter().all(StyleVector::is_finite) {
            return domain("style vectors must be finite");
        }
        Ok(())
    }
}

fn require_interior(levels: usize) -> Result<()> {
    if levels < 3 {
        return domain(format!("order loss needs at least 3 levels, got {levels}"));
    }
    Ok(())
}

/// Σ over interior levels of ‖s_y − (s_{y−1} + s_{y+1})/2‖₁ for one set.
pub fn set_order_loss(set: &StyleSet) -> Result<f64> {
    set.validate()?;
    require_interior(set.levels())?;
    let v = &set.vectors;
    let mut total = 0.0;
    for y in 1..v.len() - 1 {
        for j in 0..set.dim() {
            total += (v[y].0[j] - 0.5 * (v[y - 1].0[j] + v[y + 1].0[j])).abs();
        }
    }
    Ok(total)
}

/// Batch mean of [`set_order_loss`]; the minibatch stands in for the expectation over latents.
pub fn order_loss(batch: &[StyleSet]) -> Result<f64> {
    if batch.is_empty() {
        return domain("order loss of an empty batch");
    }
    let mut sum = 0.0;
    for set in batch {
        sum += set_order_loss(set)?;
    }
    Ok(sum / batch.len() as f64)
}

/// Order loss of one flat `[L * d]` style buffer and its gradient, scaled by `weight`.
///
/// Used inside training where styles are raw network outputs.
pub fn order_loss_flat_grad(flat: &[f64], levels: usize, weight: f64) -> (f64, Vec<f64>) {
    let d = flat.len() / levels;
    let mut grad = vec![0.0; flat.len()];
    let mut loss = 0.0;
    for y in 1..levels - 1 {
        for j in 0..d {
            let r = flat[y * d + j] - 0.5 * (flat[(y - 1) * d + j] + flat[(y + 1) * d + j]);
            loss += r.abs();
            let sgn = weight * r.signum();
            grad[y * d + j] += sgn;
            grad[(y - 1) * d + j] -= 0.5 * sgn;
            grad[(y + 1) * d + j] -= 0.5 * sgn;
        }
    }
    (loss, grad)
}

/// Σ over interior levels of ‖(s_{y+1} − s_y) − (s_y − s_{y−1})‖₁.
///
/// Zero exactly when consecutive styles are evenly spaced on a line; always
/// twice [`set_order_loss`].
pub fn linearity_residual(set: &StyleSet) -> Result<f64> {
    set.validate()?;
    require_interior(set.levels())?;
    let v = &set.vectors;
    let mut total = 0.0;
    for y in 1..v.len() - 1 {
        for j in 0..set.dim() {
            total += ((v[y + 1].0[j] - v[y].0[j]) - (v[y].0[j] - v[y - 1].0[j])).abs();
        }
    }
    Ok(total)
}

/// Split a real level into its lower integer level and the fractional offset.
/// `y_real == L` maps to `(L - 1, 1.0)`.
pub fn split_level(y_real: f64, levels: usize) -> Result<(usize, f64)> {
    if levels < 2 {
        return domain("interpolation needs at least 2 levels");
    }
    if !(y_real.is_finite() && y_real >= 1.0 && y_real <= levels as f64) {
        return domain(format!("level {y_real} outside [1, {levels}]"));
    }
    let y = (y_real.floor() as usize).min(levels - 1);
    Ok((y, y_real - y as f64))
}

/// Style for a real-valued level: `(1 − ε)·s_y + ε·s_{y+1}` with `y = ⌊y_real⌋`.
/// Integer levels return the stored style unchanged.
pub fn interpolate_style(set: &StyleSet, y_real: f64) -> Result<StyleVector> {
    set.validate()?;
    let (y, eps) = split_level(y_real, set.levels())?;
    if eps == 0.0 {
        return Ok(set.level(y).clone());
    }
    if eps == 1.0 {
        return Ok(set.level(y + 1).clone());
    }
    let (lo, hi) = (set.level(y), set.level(y + 1));
    Ok(StyleVector(
        lo.0.iter()
            .zip(&hi.0)
            .map(|(a, b)| (1.0 - eps) * a + eps * b)
            .collect(),
    ))
}

/// Per-level interpolation weights over the flat `[L * d]` buffer, for
/// back-propagating through [`interpolate_style`].
pub fn interpolation_weights(y_real: f64, levels: usize) -> Result<Vec<(usize, f64)>> {
    let (y, eps) = split_level(y_real, levels)?;
    Ok(if eps == 0.0 {
        vec![(y, 1.0)]
    } else if eps == 1.0 {
        vec![(y + 1, 1.0)]
    } else {
        vec![(y, 1.0 - eps), (y + 1, eps)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set1d(vals: &[f64]) -> StyleSet {
        StyleSet::new(vals.iter().map(|&v| StyleVector(vec![v])).collect(), 0).unwrap()
    }

    fn linear_set() -> StyleSet {
        StyleSet::new((1..=4).map(|y| StyleVector(vec![y as f64, y as f64])).collect(), 0).unwrap()
    }

    #[test]
    fn order_loss_examples() {
        assert_eq!(order_loss(&[linear_set()]).unwrap(), 0.0);
        let bumpy = set1d(&[0.0, 1.0, 1.0, 3.0]);
        assert!((order_loss(&[bumpy.clone()]).unwrap() - 1.5).abs() < 1e-12);
        assert!((order_loss(&[linear_set(), bumpy]).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn order_loss_rejects_too_few_levels() {
        assert!(order_loss(&[set1d(&[0.0, 1.0])]).is_err());
        assert!(order_loss(&[]).is_err());
        assert!(linearity_residual(&set1d(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn linearity_residual_examples() {
        assert_eq!(linearity_residual(&linear_set()).unwrap(), 0.0);
        let bumpy = set1d(&[0.0, 1.0, 1.0, 3.0]);
        assert!((linearity_residual(&bumpy).unwrap() - 3.0).abs() < 1e-12);
        assert!((linearity_residual(&bumpy).unwrap() - 2.0 * set_order_loss(&bumpy).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn interpolation_examples() {
        let set = StyleSet::new(
            vec![
                StyleVector(vec![9.0, 9.0]),
                StyleVector(vec![0.0, 2.0]),
                StyleVector(vec![4.0, 0.0]),
                StyleVector(vec![0.1, 0.7]),
            ],
            0,
        )
        .unwrap();
        assert_eq!(interpolate_style(&set, 2.0).unwrap(), set.vectors[1]);
        assert_eq!(interpolate_style(&set, 4.0).unwrap(), set.vectors[3]);
        assert_eq!(interpolate_style(&set, 2.5).unwrap().0, vec![2.0, 1.0]);
        assert!(interpolate_style(&set, 0.99).is_err());
        assert!(interpolate_style(&set, 4.01).is_err());
        assert!(interpolate_style(&set, f64::NAN).is_err());
    }

    #[test]
    fn flat_gradient_matches_finite_differences() {
        let flat = vec![0.3, -1.2, 0.8, 0.4, 2.0, -0.7, 1.1, 0.05];
        let (loss, grad) = order_loss_flat_grad(&flat, 4, 1.0);
        let set = StyleSet::from_flat(&flat, 4, 0);
        assert!((loss - set_order_loss(&set).unwrap()).abs() < 1e-12);
        let mut p = flat.clone();
        for i in 0..p.len() {
            let n = crate::nn::gradcheck::central_difference(&mut p, i, 1e-6, |q| order_loss_flat_grad(q, 4, 1.0).0);
            assert!((n - grad[i]).abs() < 1e-6, "coord {i}: {n} vs {}", grad[i]);
        }
    }

    #[test]
    fn style_sets_round_trip_as_json_arrays() {
        let set = linear_set();
        let json = serde_json::to_string(&set).unwrap();
        assert!(json.starts_with("{\"vectors\":[[1.0,1.0]"));
        let back: StyleSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
    }
}

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{config, Result};
use crate::nn::Tensor3;
use crate::rng;

/// Duplicate minority-class items (sampling with replacement) until every
/// level has as many items as the largest one, then shuffle.
pub fn oversample_balance<T, F>(items: &[T], label: F, levels: usize, seed: u64) -> Result<Vec<T>>
where
    T: Clone,
    F: Fn(&T) -> usize,
{
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); levels];
    for (i, it) in items.iter().enumerate() {
        let y = label(it);
        if y == 0 || y > levels {
            return config(format!("label {y} outside 1..={levels}"));
        }
        by_class[y - 1].push(i);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return config(format!("level {} has no training items to oversample", empty + 1));
    }
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = rng::rng_for(seed, "oversample", 0);
    let mut picked: Vec<usize> = Vec::with_capacity(target * levels);
    for members in &by_class {
        picked.extend(members);
        for _ in members.len()..target {
            picked.push(members[rng.random_range(0..members.len())]);
        }
    }
    picked.shuffle(&mut rng);
    Ok(picked.into_iter().map(|i| items[i].clone()).collect())
}

/// A flip/rotation drawn for classic augmentation. Applied as horizontal
/// flip, then vertical flip, then `rot90` counter-clockwise quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassicTransform {
    pub hflip: bool,
    pub vflip: bool,
    pub rot90: u8,
}

impl ClassicTransform {
    pub const IDENTITY: Self = Self {
        hflip: false,
        vflip: false,
        rot90: 0,
    };

    pub fn sample(seed: u64) -> Self {
        let mut rng = rng::rng_for(seed, "classic-augment", 0);
        Self {
            hflip: rng.random_bool(0.5),
            vflip: rng.random_bool(0.5),
            rot90: rng.random_range(0..4u8),
        }
    }

    pub fn apply(&self, img: &Tensor3) -> Tensor3 {
        let mut out = img.clone();
        if self.hflip {
            out = remap(&out, out.h, out.w, |y, x, _, w| (y, w - 1 - x));
        }
        if self.vflip {
            out = remap(&out, out.h, out.w, |y, x, h, _| (h - 1 - y, x));
        }
        for _ in 0..self.rot90 % 4 {
            // out[y][x] = in[x][W-1-y] with output shape (W, H)
            out = remap(&out, out.w, out.h, |y, x, _, w| (x, w - 1 - y));
        }
        out
    }
}

/// Build an `oh × ow` image where output `(y, x)` reads input at `src(y, x, in_h, in_w)`.
fn remap<F>(img: &Tensor3, oh: usize, ow: usize, src: F) -> Tensor3
where
    F: Fn(usize, usize, usize, usize) -> (usize, usize),
{
    let mut out = Tensor3::zeros(img.c, oh, ow);
    for c in 0..img.c {
        for y in 0..oh {
            for x in 0..ow {
                let (sy, sx) = src(y, x, img.h, img.w);
                let i = out.idx(c, y, x);
                out.data[i] = img.at(c, sy, sx);
            }
        }
    }
    out
}

/// Random horizontal/vertical flip (p = 0.5 each) and rotation by a multiple of 90°.
pub fn classic_augment(img: &Tensor3, seed: u64) -> Tensor3 {
    ClassicTransform::sample(seed).apply(img)
}

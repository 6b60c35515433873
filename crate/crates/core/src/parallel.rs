//! Data-parallel helpers. With the `parallel` feature the maps below run on
//! the rayon pool; without it (or with [`Parallelism::Sequential`]) they run
//! in a plain loop. Results are always returned in input order and reductions
//! are done by the caller in that order, so output is bitwise identical
//! either way.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    /// Rayon work-stealing pool. Falls back to sequential when the crate is
    /// built without the `parallel` feature.
    Rayon,
}

static MODE: AtomicU8 = AtomicU8::new(if cfg!(feature = "parallel") { 1 } else { 0 });

pub fn set_parallelism(mode: Parallelism) {
    MODE.store(
        match mode {
            Parallelism::Sequential => 0,
            Parallelism::Rayon => 1,
        },
        Ordering::Relaxed,
    );
}

pub fn parallelism() -> Parallelism {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == 1 {
        Parallelism::Rayon
    } else {
        Parallelism::Sequential
    }
}

/// `(0..n).map(f)` collected in order, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism() == Parallelism::Rayon && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// `items.iter().map(f)` collected in order, possibly in parallel.
pub fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_range(items.len(), |i| f(&items[i]))
}

/// Fallible variant of [`map_range`]; the first error in index order wins.
pub fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}

//! Deterministic blocked reductions with an optional rayon backend.
//!
//! Sums over components are split into fixed blocks of [`BLOCK`] consecutive
//! entries. Each block is summed in ascending order and the block partials
//! are then combined left to right. The grouping does not depend on the
//! thread count, so the sequential and parallel paths produce bitwise
//! identical results.

use crate::error::Result;

/// Number of consecutive terms summed sequentially inside one block.
pub const BLOCK: usize = 64;

/// Execution strategy for data-parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise falls back
    /// to [`Exec::Sequential`].
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this strategy actually runs on the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Sums `term(item)` over `items` into a `dim`-vector. `term` adds its
/// contribution into the provided accumulator.
pub fn sum_vectors<T, F>(exec: Exec, items: &[T], dim: usize, term: F) -> Result<Vec<f64>>
where
    T: Sync,
    F: Fn(&T, &mut [f64]) -> Result<()> + Sync,
{
    let block_sum = |chunk: &[T]| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; dim];
        for item in chunk {
            term(item, &mut acc)?;
        }
        Ok(acc)
    };
    let partials: Vec<Result<Vec<f64>>> = map_blocks(exec, items, block_sum);
    let mut total = vec![0.0; dim];
    for p in partials {
        let p = p?;
        for (t, v) in total.iter_mut().zip(&p) {
            *t += v;
        }
    }
    Ok(total)
}

/// Sums scalar terms with the same blocking as [`sum_vectors`].
pub fn sum_scalars<T, F>(exec: Exec, items: &[T], term: F) -> Result<f64>
where
    T: Sync,
    F: Fn(&T) -> Result<f64> + Sync,
{
    let block_sum = |chunk: &[T]| -> Result<f64> {
        let mut acc = 0.0;
        for item in chunk {
            acc += term(item)?;
        }
        Ok(acc)
    };
    let partials: Vec<Result<f64>> = map_blocks(exec, items, block_sum);
    let mut total = 0.0;
    for p in partials {
        total += p?;
    }
    Ok(total)
}

/// Applies `f` to each block of `items`, returning results in block order.
pub fn map_blocks<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel && items.len() > BLOCK {
        use rayon::prelude::*;
        return items.par_chunks(BLOCK).map(&f).collect();
    }
    let _ = exec;
    items.chunks(BLOCK).map(f).collect()
}

/// Maps `f` over `items`, preserving order. Used for independent replicas
/// (seeds, Monte-Carlo replays, random test models).
pub fn map_ordered<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(&f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

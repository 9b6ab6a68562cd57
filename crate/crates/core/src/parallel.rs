//! Ordered parallel maps.
//!
//! Results come back in index order and every reduction in the crate runs
//! sequentially over that order (or over integers), so the number of worker
//! threads never changes a result.

use rayon::prelude::*;

/// `f(0), f(1), ..., f(n - 1)` evaluated on the current rayon pool.
pub fn map_indexed<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Like [`map_indexed`] but stops at the first error, reporting the lowest failing index.
pub fn try_map_indexed<T, E, F>(n: u64, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync + Send,
{
    let results: Vec<Result<T, E>> = map_indexed(n, f);
    results.into_iter().collect()
}

/// Runs `op` on a dedicated pool with `workers` threads (`None` uses the global pool).
pub fn with_workers<R: Send>(workers: Option<usize>, op: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(op),
        None => op(),
    }
}

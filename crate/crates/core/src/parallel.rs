//! Data-parallel map with a sequential fallback.
//!
//! The two parallel surfaces in this crate (the batch harness and the
//! brute-force direction scan) are index-parallel maps whose outputs are
//! collected in index order, so results do not depend on scheduling. With
//! the `parallel` feature disabled (or `workers <= 1`) the same closure runs
//! sequentially.

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers == 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    if workers == 0 {
        // Runtime default: the shared global pool, no construction cost.
        return (0..n).into_par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, _workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

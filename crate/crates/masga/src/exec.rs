use std::ops::Range;

use masga_core::adaptive::PathExecutor;
use rayon::prelude::*;

/// Evaluates paths on the current rayon pool. Results, and the first error
/// in path order, do not depend on the number of threads.
#[derive(Clone, Copy, Debug, Default)]
pub struct Parallel;

impl PathExecutor for Parallel {
    fn run<F>(&self, paths: Range<u64>, sample: F) -> masga_core::error::Result<Vec<(f64, u64)>>
    where
        F: Fn(u64) -> masga_core::error::Result<(f64, u64)> + Sync + Send,
    {
        let out: Vec<_> = paths.into_par_iter().map(sample).collect();
        out.into_iter().collect()
    }
}

/// Run `f` inside a pool with `threads` workers (0 picks the rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

//! Execution strategy for the data-parallel stages.
//!
//! With the `parallel` feature (default) the per-tile, per-instance and
//! per-label loops run on a rayon pool sized by the run's worker count;
//! without it they run sequentially on the caller thread. Results are always
//! collected in input order, so output bytes do not depend on the worker
//! count or on which path executed.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Runs `body` under a dedicated worker pool of the given size.
///
/// `workers == 0` means "use the default parallelism". The pool is local, so
/// `workers == 1` makes every nested data-parallel loop genuinely
/// sequential, and concurrent callers never starve each other through the
/// global pool.
pub fn with_workers<R: Send>(workers: usize, body: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if workers > 0 {
            builder = builder.num_threads(workers);
        }
        match builder.build() {
            Ok(pool) => pool.install(body),
            // Pool creation can only fail on resource exhaustion; degrade to
            // the caller thread rather than aborting the run.
            Err(_) => body(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        body()
    }
}

/// Order-preserving map over owned items.
pub fn map_ordered<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Order-preserving indexed map over a slice.
pub fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

//! Data-parallel execution helpers.
//!
//! With the default `parallel` feature the ensemble loops run on rayon;
//! without it they fall back to plain sequential iteration. Results are
//! bit-identical in both modes because every work item derives its randomness
//! from its own counter-based stream and outputs are collected in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Run `f` inside a thread pool with the given number of workers. `None`
/// uses the global pool (all available cores). Without the `parallel`
/// feature the worker count is ignored and `f` runs on the calling thread.
#[cfg(feature = "parallel")]
pub fn run_with_workers<R, F>(workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("failed to build thread pool")
            .install(f),
    }
}

/// Run `f` on the calling thread (sequential build).
#[cfg(not(feature = "parallel"))]
pub fn run_with_workers<R, F>(_workers: Option<usize>, f: F) -> R
where
    F: FnOnce() -> R,
{
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_index_order() {
        let v = map_indexed(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let base = map_indexed(64, |i| (i as f64).sin());
        let one = run_with_workers(Some(1), || map_indexed(64, |i| (i as f64).sin()));
        let four = run_with_workers(Some(4), || map_indexed(64, |i| (i as f64).sin()));
        assert_eq!(base, one);
        assert_eq!(base, four);
    }
}

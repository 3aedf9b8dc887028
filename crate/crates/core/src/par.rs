//! Data-parallel helpers. With the `parallel` feature the per-item work runs
//! on the rayon pool; without it (or with [`Exec::Sequential`]) it runs in a
//! plain loop. Results are always collected in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many items the parallel path is not worth the scheduling cost.
pub const MIN_PARALLEL_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Maps `f` over `0..len`, returning results in index order.
pub fn map_indexed<T, F>(exec: Exec, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel && len >= MIN_PARALLEL_LEN {
        return (0..len)
            .into_par_iter()
            .with_min_len(MIN_PARALLEL_LEN)
            .map(f)
            .collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Caps the global pool at `CONVEXFLOW_THREADS` threads when that variable is
/// set. Returns the number of threads requested, if any. Calling this after the
/// pool has been initialised has no effect.
pub fn init_threads_from_env() -> Option<usize> {
    let threads = std::env::var("CONVEXFLOW_THREADS")
        .ok()?
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&t| t > 0)?;
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Some(threads)
}

//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the maps below run on rayon; without it they
//! run in a plain loop. Output order is the input order in both cases, and
//! shard accumulators are always combined by the caller in shard order, so a
//! result depends only on the shard count, never on the thread count.

use std::ops::Range;

/// Splits `0..n` into at most `shards` contiguous, non-empty ranges.
pub fn shard_ranges(n: usize, shards: usize) -> Vec<Range<usize>> {
    let shards = shards.max(1).min(n.max(1));
    let base = n / shards;
    let extra = n % shards;
    let mut out = Vec::with_capacity(shards);
    let mut start = 0;
    for s in 0..shards {
        let len = base + usize::from(s < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Applies `f` to each shard of `0..n`; results are in shard order.
pub fn map_shards<T, F>(n: usize, shards: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync + Send,
{
    let ranges = shard_ranges(n, shards);
    map_indexed(ranges.len(), |s| f(s, ranges[s].clone()))
}

/// Applies `f` to `0..count`; results are in index order.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Runs `op` with at most `jobs` worker threads. `jobs <= 1` runs inline
/// on a single-thread pool so nested maps stay sequential.
pub fn with_jobs<R, OP>(jobs: usize, op: OP) -> R
where
    R: Send,
    OP: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        op()
    }
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

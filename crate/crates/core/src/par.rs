//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled these dispatch onto the ambient rayon
//! pool; without it they run in order on the calling thread. Reductions always
//! split work into fixed-size chunks and combine partial results in chunk
//! order, so floating-point results do not depend on thread count or
//! scheduling.

use std::ops::Range;

/// Rows per chunk for per-sample reductions.
pub const CHUNK: usize = 256;

fn chunks(n: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect()
}

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Order-preserving map over a slice.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Deterministic scalar reduction: `f` is evaluated on fixed row ranges and
/// the partial sums are added in range order.
pub fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync + Send,
{
    let ranges = chunks(n, CHUNK);
    map_slice(&ranges, |r| f(r.clone())).into_iter().sum()
}

/// Deterministic vector reduction of length `len`.
pub fn chunked_vec_sum<F>(n: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(Range<usize>, &mut [f64]) + Sync + Send,
{
    let ranges = chunks(n, CHUNK);
    let partials = map_slice(&ranges, |r| {
        let mut acc = vec![0.0; len];
        f(r.clone(), &mut acc);
        acc
    });
    let mut out = vec![0.0; len];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

/// Runs `f` on a dedicated pool with `jobs` threads when parallelism is
/// compiled in; otherwise calls `f` directly.
pub fn with_jobs<R: Send, F: FnOnce() -> R + Send>(jobs: usize, f: F) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
        {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_cover() {
        let r = chunks(600, 256);
        assert_eq!(r, vec![0..256, 256..512, 512..600]);
        assert!(chunks(0, 256).is_empty());
    }

    #[test]
    fn sums_are_reproducible() {
        let vals: Vec<f64> = (0..10_000).map(|i| (i as f64).sin() * 1e-3).collect();
        let a = chunked_sum(vals.len(), |r| vals[r].iter().sum());
        let b = with_jobs(1, || chunked_sum(vals.len(), |r| vals[r].iter().sum()));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn map_preserves_order() {
        assert_eq!(map_range(5, |i| i * i), vec![0, 1, 4, 9, 16]);
    }
}

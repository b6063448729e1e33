//! Data-parallel helpers.
//!
//! With the `parallel` feature these dispatch to rayon, otherwise they run
//! sequentially. Results are always returned in input order and reductions
//! use a fixed chunking, so output bits do not depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
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

/// Map `f` over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Deterministic chunked reduction: `fold` runs over fixed-size chunks of
/// `items` (possibly in parallel), then chunk results are merged left to
/// right with `merge`.
pub fn chunked_reduce<T, A, F, M>(items: &[T], chunk: usize, fold: F, merge: M) -> Option<A>
where
    T: Sync,
    A: Send,
    F: Fn(usize, &[T]) -> A + Sync + Send,
    M: Fn(A, A) -> A,
{
    let chunk = chunk.max(1);
    let starts: Vec<usize> = (0..items.len()).step_by(chunk).collect();
    let partials = map(&starts, |_, &s| fold(s, &items[s..(s + chunk).min(items.len())]));
    partials.into_iter().reduce(merge)
}

/// Run `f` inside a pool capped at `threads` workers (0 = library default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if threads == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let v: Vec<u32> = (0..100).collect();
        let out = map(&v, |i, x| (i as u32) * 1000 + x);
        assert!(out.iter().enumerate().all(|(i, &y)| y == i as u32 * 1001));
    }

    #[test]
    fn chunked_reduce_is_thread_count_independent() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let sum = |threads| {
            with_threads(threads, || {
                chunked_reduce(&v, 7, |_, c| c.iter().sum::<f64>(), |a, b| a + b).unwrap()
            })
        };
        assert_eq!(sum(1).to_bits(), sum(4).to_bits());
    }
}

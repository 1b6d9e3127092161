//! Data-parallel helpers. With the `parallel` feature (default) these run on
//! the rayon pool; without it they fall back to plain iterators. Callers
//! only ever see deterministic results: work items carry their own seeds and
//! reductions are associative.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::Result;

/// `(0..n).map(f).collect()`, possibly in parallel. Output order is index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Fallible [`map_range`]; the error reported is the one at the lowest index.
pub fn try_map_range<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}

/// Map over a slice, possibly in parallel.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Fold `0..n` into per-worker accumulators and merge them with `reduce`.
/// `reduce` must be associative and `identity` its neutral element.
pub fn fold_range<A, Id, F, R>(n: usize, identity: Id, fold: F, reduce: R) -> A
where
    A: Send,
    Id: Fn() -> A + Sync + Send,
    F: Fn(A, usize) -> A + Sync + Send,
    R: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().fold(&identity, &fold).reduce(&identity, &reduce)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = &reduce;
        (0..n).fold(identity(), fold)
    }
}

/// Number of worker threads the helpers will use.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn fold_range_sums() {
        let s = fold_range(1001, || 0u64, |a, i| a + i as u64, |a, b| a + b);
        assert_eq!(s, 500_500);
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: Result<Vec<usize>> = try_map_range(10, |i| {
            if i >= 3 {
                Err(crate::Error::param(format!("bad {i}")))
            } else {
                Ok(i)
            }
        });
        assert_eq!(r.unwrap_err().to_string(), "invalid parameter: bad 3");
    }
}

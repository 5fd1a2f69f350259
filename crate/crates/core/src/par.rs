//! Order-preserving map that runs on rayon when the `parallel` feature is
//! enabled and on a plain iterator otherwise.
//!
//! Results are always returned in input order, so any reduction the caller
//! performs afterwards is independent of the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, returning results in input order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

/// Maps `f` over `items`, returning results in input order.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    map_ordered((0..n).collect(), f)
}

/// Whether this build evaluates batches on the rayon pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

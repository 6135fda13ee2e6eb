//! Order-preserving batch mapping with an optional data-parallel backend.
//!
//! With the `parallel` feature (on by default) batch operations fan out over
//! rayon's thread pool; without it they run sequentially. Both paths visit
//! items independently and collect results in input order, so outputs are
//! identical regardless of the backend.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving input order in the output.
#[cfg(feature = "parallel")]
pub fn map_ordered<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, preserving input order in the output.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, U, F: Fn(&T) -> U>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Sequential reference implementation of [`map_ordered`].
///
/// Always available so benchmarks can compare the parallel backend against
/// the exact same per-item work run on one thread.
pub fn map_sequential<T, U, F: Fn(&T) -> U>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

//! Ordered parallel map over an index range. Results come back in index
//! order, so reductions over them are deterministic.

#[cfg(feature = "parallel")]
pub fn map_range<T: Send, F: Fn(usize) -> T + Sync>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(|i| f(i)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<T: Send, F: Fn(usize) -> T + Sync>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

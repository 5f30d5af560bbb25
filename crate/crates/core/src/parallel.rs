//! Data-parallel map with a sequential fallback.
//!
//! With the default `parallel` feature the closures run on the rayon global
//! pool; without it the same API degrades to a plain sequential loop. Every
//! call site derives per-item seeds *before* the map and results are collected
//! in input order, so output bytes are identical under both execution modes
//! and any thread count.

/// Applies `f` to each item, preserving input order in the output.
#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

/// Applies `f` to each item, preserving input order in the output.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// True when the crate was built with the rayon-backed executor.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

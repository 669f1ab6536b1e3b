//! Data-parallel helpers for batch evaluation.
//!
//! Scenario runs, workload replays and bench profiles are independent of
//! one another, so sweeps over them parallelize trivially. With the
//! `parallel` feature (default) the sweep helpers fan out over rayon; a
//! `--no-default-features` build falls back to sequential iteration with an
//! identical API and identical results — rayon's `map` preserves input
//! order, so output vectors match element for element.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Sequential twin of [`map_collect`], kept available in every build so
/// benchmarks can compare the two lanes directly.
pub fn map_collect_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

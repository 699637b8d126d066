//! Data-parallel map with a sequential fallback.
//!
//! The `parallel` feature (enabled by default) runs independent work items
//! on the rayon thread pool. Outputs are always collected in index order and
//! every reduction happens sequentially afterwards, so the feature changes
//! wall time, never output bits.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..len`, returning results in index order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Sequential twin of [`map_indexed`], independent of compile-time features.
///
/// Exists so benches and determinism tests can compare both execution routes
/// within a single build.
pub fn map_indexed_sequential<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let f = |i: usize| (i as f64 * 0.3415926).sin() / (i as f64 + 1.0);
        let a = map_indexed(1000, f);
        let b = map_indexed_sequential(1000, f);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

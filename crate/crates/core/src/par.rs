//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper maps an index range to a `Vec` in index order, so callers
//! that reduce the returned vector sequentially get the same floating-point
//! result whether the map ran on rayon or on the calling thread.
//!
//! With the `parallel` feature disabled everything runs sequentially.
//! [`sequential`] forces the sequential path for the duration of a closure,
//! which is what the benchmarks use to compare the two.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with all helpers in this module forced onto the calling thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let out = f();
    FORCE_SEQUENTIAL.with(|c| c.set(prev));
    out
}

/// True when the next helper call will use rayon.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(|c| c.get())
}

/// `(0..len).map(f).collect()`, in parallel when enabled.
pub fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    (0..len).map(f).collect()
}

/// Like [`map_range`] but over a slice.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Pairwise (cascade) summation. Deterministic for a given input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_keeps_order_in_both_modes() {
        let par = map_range(1000, |i| i * i);
        let seq = sequential(|| map_range(1000, |i| i * i));
        assert_eq!(par, seq);
        assert_eq!(par[999], 999 * 999);
    }

    #[test]
    fn sequential_scope_restores_flag() {
        let before = is_parallel();
        sequential(|| assert!(!is_parallel()));
        assert_eq!(is_parallel(), before);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 999.0 * 1000.0 / 2.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}

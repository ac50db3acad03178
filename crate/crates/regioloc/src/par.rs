//! Data-parallel helpers with a sequential fallback.
//!
//! The `parallel` feature (on by default) routes these through rayon; without
//! it, or when the caller passes `parallel = false`, the loops run
//! sequentially. All call sites are order-preserving maps or associative
//! reductions, so results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Order-preserving map over a slice.
pub fn maybe_par_map<T, U, F>(items: &[T], parallel: bool, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return items.par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

/// Map over an index range, order preserved.
pub fn maybe_par_map_range<U, F>(count: usize, parallel: bool, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return (0..count).into_par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = maybe_par_map(&items, false, |x| x * x);
        let par = maybe_par_map(&items, true, |x| x * x);
        assert_eq!(seq, par);
        let seq_r = maybe_par_map_range(100, false, |i| i as f64 * 0.5);
        let par_r = maybe_par_map_range(100, true, |i| i as f64 * 0.5);
        assert_eq!(seq_r, par_r);
    }
}

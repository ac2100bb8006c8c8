//! Data-parallel helpers.
//!
//! With the `parallel` feature the helpers fan out over rayon's pool; without
//! it (or after `set_parallel(false)`) they run the same closures in order on
//! the calling thread. Results are always returned in index order, so callers
//! get identical output in both modes.

use std::sync::atomic::{AtomicBool, Ordering};

static ENABLED: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Switches between the rayon path and the sequential fallback at runtime.
/// Has no effect when the crate is built without the `parallel` feature.
pub fn set_parallel(on: bool) {
    ENABLED.store(on && cfg!(feature = "parallel"), Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    ENABLED.load(Ordering::Relaxed)
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Maps every element of a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Fills consecutive `width`-sized rows of `out` with `f(row_index, row)`.
pub fn fill_rows<T, F>(out: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    for (i, row) in out.chunks_mut(width).enumerate() {
        f(i, row);
    }
}

/// Returns the first `Some` in index order, evaluating indices concurrently.
pub fn find_first<T, F>(n: usize, f: F) -> Option<T>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().find_map_first(f);
    }
    (0..n).find_map(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i * i) % 7;
        set_parallel(true);
        let a = map_range(100, f);
        let first_a = find_first(100, |i| (f(i) == 4).then_some(i));
        set_parallel(false);
        let b = map_range(100, f);
        let first_b = find_first(100, |i| (f(i) == 4).then_some(i));
        set_parallel(true);
        assert_eq!(a, b);
        assert_eq!(first_a, first_b);
        assert_eq!(first_a, Some(2));
    }

    #[test]
    fn fill_rows_by_index() {
        let mut v = vec![0usize; 12];
        fill_rows(&mut v, 4, |i, row| row.iter_mut().for_each(|x| *x = i));
        assert_eq!(v, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
    }
}

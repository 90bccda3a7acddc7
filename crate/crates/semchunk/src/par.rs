//! Data-parallel mapping helpers.
//!
//! With the `parallel` feature (default) the mappers fan work out over rayon;
//! without it they degrade to plain sequential iteration. Output order always
//! matches input order, so results are identical either way. Reductions over
//! the returned `Vec` stay sequential to keep float accumulation stable.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential mapper, always available. Benches use it as the baseline
/// against [`map`].
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map `f` over `items` with at most `jobs` invocations in flight.
///
/// Used for endpoint traffic, where the bound is a contract. With the
/// `parallel` feature this runs on a dedicated pool of `jobs` threads;
/// without it the work runs sequentially (a bound of 1).
#[cfg(feature = "parallel")]
pub fn map_bounded<T, U, F>(jobs: usize, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    let jobs = jobs.max(1);
    if jobs == 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("failed to build worker pool");
    pool.install(|| items.par_iter().map(f).collect())
}

/// Sequential fallback: the bound is trivially 1.
#[cfg(not(feature = "parallel"))]
pub fn map_bounded<T, U, F>(_jobs: usize, items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<u32> = (0..100).collect();
        let out = map(&items, |x| x * 2);
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert_eq!(out, map_seq(&items, |x| x * 2));
    }

    #[test]
    fn bounded_map_preserves_order() {
        let items: Vec<u32> = (0..50).collect();
        let out = map_bounded(4, &items, |x| x + 1);
        assert_eq!(out, items.iter().map(|x| x + 1).collect::<Vec<_>>());
    }
}

//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these fan out over rayon's current
//! pool; without it, or inside a single-thread [`Pool`], they run on the
//! calling thread. Callers only rely on the output order, never on execution
//! order, so both paths produce identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
thread_local! {
    static INLINE: std::cell::Cell<bool> = const { std::cell::Cell::new(false) };
}

#[cfg(feature = "parallel")]
fn inline() -> bool {
    INLINE.with(|c| c.get())
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !inline() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Calls `f(i, &mut items[i])` for every element, possibly in parallel.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !inline() {
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Runs `f` inside a pool of `threads` workers when parallelism is enabled.
/// A single-thread pool runs `f` on the calling thread.
pub struct Pool {
    #[cfg(feature = "parallel")]
    inner: Option<rayon::ThreadPool>,
}

impl Pool {
    pub fn new(threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let inner = if threads > 1 {
                rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok()
            } else {
                None
            };
            Pool { inner }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = threads;
            Pool {}
        }
    }

    pub fn install<R: Send, F: FnOnce() -> R + Send>(&self, f: F) -> R {
        #[cfg(feature = "parallel")]
        {
            match &self.inner {
                Some(pool) => pool.install(f),
                None => {
                    struct Restore(bool);
                    impl Drop for Restore {
                        fn drop(&mut self) {
                            INLINE.with(|c| c.set(self.0));
                        }
                    }
                    let _restore = Restore(INLINE.with(|c| c.replace(true)));
                    f()
                }
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            f()
        }
    }
}

impl std::fmt::Debug for Pool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pool").finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_thread_pool_matches_parallel() {
        let seq = Pool::new(1).install(|| map_range(100, |i| i * i));
        let par = Pool::new(3).install(|| map_range(100, |i| i * i));
        assert_eq!(seq, par);
        let mut v = vec![0usize; 10];
        Pool::new(1).install(|| for_each_mut(&mut v, |i, x| *x = i + 1));
        assert_eq!(v, (1..=10).collect::<Vec<_>>());
    }
}

//! Worker pool and order-preserving parallel maps.
//!
//! Every path is a pure function of its index, and results are collected
//! in index order before any reduction, so outputs do not depend on the
//! number of workers.

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::CliError;

pub fn pool(threads: Option<usize>) -> Result<ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        b = b.num_threads(k);
    }
    b.build()
        .map_err(|e| CliError::config("threads", e.to_string()))
}

/// `f(0), ..., f(count - 1)` in order, on the current rayon pool.
pub fn map_indexed<T, F>(count: usize, f: F) -> renewal_gauss_core::Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> renewal_gauss_core::Result<T> + Sync + Send,
{
    (0..count as u64).into_par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_workers() {
        let run = |k| {
            pool(Some(k))
                .unwrap()
                .install(|| map_indexed(1000, |i| Ok(i * i)).unwrap())
        };
        assert_eq!(run(1), run(4));
        assert_eq!(run(3)[999], 999 * 999);
    }
}

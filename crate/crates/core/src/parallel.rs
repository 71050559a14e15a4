use rayon::prelude::*;

use crate::error::{Error, Result};

/// Maps `f` over `items` on up to `jobs` threads, keeping input order.
/// The first error in item order wins.
pub(crate) fn try_map<I, O, F>(jobs: usize, items: &[I], f: F) -> Result<Vec<O>>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> Result<O> + Sync,
{
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

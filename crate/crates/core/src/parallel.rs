use rayon::prelude::*;

use crate::error::{Error, Result};

/// Evaluates `f(0..count)` in parallel and returns the results in index order.
///
/// `workers = None` uses the global rayon pool; `Some(w)` runs on a dedicated
/// pool with `w` threads. Output order never depends on the schedule.
pub fn map_indexed<T, F>(workers: Option<usize>, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let run = || (0..count).into_par_iter().map(&f).collect::<Vec<T>>();
    match workers {
        None => Ok(run()),
        Some(0) => Err(Error::config("worker count must be >= 1")),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::config(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(run))
        }
    }
}

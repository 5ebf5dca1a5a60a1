use rayon::prelude::*;

use crate::error::{HarnessError, Result};

/// Maps `f` over `cells` on `workers` threads (`0` = rayon default) and
/// returns results in cell order, so the outcome never depends on the
/// thread count.
pub fn run_cells<C, R, F>(workers: usize, cells: &[C], f: F) -> Result<Vec<R>>
where
    C: Sync,
    R: Send,
    F: Fn(&C) -> Result<R> + Sync + Send,
{
    let job = || cells.par_iter().map(&f).collect::<Result<Vec<R>>>();
    if workers == 0 {
        return job();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {workers} workers: {e}")))?
        .install(job)
}

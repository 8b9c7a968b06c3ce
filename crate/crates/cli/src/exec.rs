use nssm_unc_core::trainer::BatchExecutor;
use rayon::prelude::*;

/// Evaluates minibatch items on the rayon pool. Results keep input order, so
/// the reduction that follows is deterministic.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl BatchExecutor for RayonExecutor {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.par_iter().map(f).collect()
    }
}

//! Batch evaluation with an optional rayon backend.
//!
//! Output order always follows input order, so downstream accumulation is
//! bit-identical whichever backend ran.

use crate::coalition::Coalition;
use crate::config::Execution;
use crate::games::CooperativeGame;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `v(z)` for every coalition in the batch.
pub fn evaluate_batch<G: CooperativeGame + ?Sized>(
    game: &G,
    coalitions: &[Coalition],
    execution: Execution,
) -> Vec<f64> {
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => coalitions.par_iter().map(|z| game.evaluate(z)).collect(),
        _ => coalitions.iter().map(|z| game.evaluate(z)).collect(),
    }
}

/// Maps `f` over `0..n`, collecting in index order.
pub fn map_indices<T, F>(n: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Whether `Execution::Parallel` actually runs on a thread pool in this build.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

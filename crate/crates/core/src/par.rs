//! Order-preserving map over an index range, parallel when the `parallel`
//! feature is enabled and the caller asks for it.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Maps `f` over `start..end`, returning results in index order.
///
/// The output never depends on the execution mode or thread count.
pub fn map_range<T, F>(exec: Execution, start: usize, end: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (start..end).into_par_iter().map(f).collect()
        }
        _ => (start..end).map(f).collect(),
    }
}

/// Number of worker threads the parallel path would use.
pub fn worker_count(exec: Execution) -> usize {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => rayon::current_num_threads(),
        _ => 1,
    }
}

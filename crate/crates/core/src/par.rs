//! Node-parallel map used by the operators.

use rayon::prelude::*;

/// Below this many nodes a sweep is cheaper than the thread hand-off.
const PAR_THRESHOLD: usize = 2048;

pub(crate) fn map_nodes<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if n >= PAR_THRESHOLD && rayon::current_num_threads() > 1 {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

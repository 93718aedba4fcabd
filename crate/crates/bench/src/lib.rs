//! Fixtures shared by the criterion benchmarks.

use edgebatch_core::sim::{sample_instance, Scenario};
use edgebatch_core::{Instance, LatencyProfile};

/// Default scenario with the synthetic profile split into `depth` blocks.
pub fn scenario(depth: usize) -> Scenario {
    let mut s = Scenario::standard(100.0, 10.0, 1);
    if depth != s.profile.depth() {
        s.profile = LatencyProfile::synthetic_with_depth(depth).expect("positive depth");
        s.exit_dist.clear();
    }
    s
}

/// Seeded epoch instance with `tasks` pending requests.
pub fn instance(tasks: usize, depth: usize, index: u64) -> Instance {
    sample_instance(&scenario(depth), tasks, index)
}

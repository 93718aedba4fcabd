//! Joint bandwidth allocation and batch scheduling for multiuser edge
//! inference, with and without early exits.
//!
//! An epoch's [`Instance`] collects pending requests; the solvers pick the
//! largest subset that can upload within one communication slot and finish
//! batched inference within each task's latency budget.
//!
//! * [`solver_full`]: optimal for full-network inference.
//! * [`solver_ee`]: tightened sub-optimal, greedy, and optimal tree search for
//!   early-exit inference.
//! * [`oracle`]: brute-force references used for certification.
//! * [`sim`]: epoch simulator, baselines and workload generation.

pub mod error;
pub mod format;
pub mod model;
pub mod oracle;
pub mod sim;
pub mod solver_ee;
pub mod solver_full;

pub use error::{FormatError, ModelError};
pub use model::{
    block_batch_sizes, check_feasible, exit_point_for_accuracy, latency_budget, min_bandwidth_fraction, BatchTime,
    ComputeMode, Instance, LatencyProfile, LinkQuality, Selection, SystemConfig, TaskId, TaskRequest,
};
pub use solver_ee::{
    solve_p2_optimal, solve_p2_suboptimal, solve_p4_tree, solve_p5_greedy, tightened_feasible_set, visit_node,
    ExitGroups, SearchNode, SearchStats, TreeSearch, Visit,
};
pub use solver_full::{solve_p1, solve_p3, FeasibleSet};

//! Epoch-level simulation of the scheduler against Poisson workloads, plus the
//! two non-slotted baselines it is compared with.
//!
//! Epoch `j` starts at `j * P` where `P` is the longer of the two slots. Tasks
//! that arrived by then and have not been served form the epoch's instance;
//! the selected ones upload during `[jP, jP + T_comm)` and are computed in the
//! overlapping slot that follows. Unselected tasks stay pending until their
//! budget can no longer cover the smallest compute they could ever get.

mod baseline;
mod bounds;
mod scenario;
mod workload;

use serde::Serialize;

pub use baseline::{
    optimize_static_params, run_baseline_single_instance, run_baseline_static_batching, StaticGrid,
};
pub use bounds::{throughput_upper_bound, BoundVariant};
pub use scenario::{Scenario, StaticParams, UniformRange};
pub use workload::{generate_workload, sample_instance, stream_rng, Arrival};

use crate::model::{check_feasible, latency_budget, ComputeMode, Instance, LatencyProfile, Selection, TaskRequest};
use crate::solver_ee::{solve_p2_optimal, solve_p2_suboptimal, SearchStats};
use crate::solver_full::solve_p1;

/// Scheduling policy run at every epoch boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    FullOptimal,
    EeSuboptimal,
    EeOptimal,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::FullOptimal, Policy::EeSuboptimal, Policy::EeOptimal];

    pub fn name(self) -> &'static str {
        match self {
            Policy::FullOptimal => "full_optimal",
            Policy::EeSuboptimal => "ee_suboptimal",
            Policy::EeOptimal => "ee_optimal",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn mode(self) -> ComputeMode {
        match self {
            Policy::FullOptimal => ComputeMode::FullNetwork,
            _ => ComputeMode::EarlyExit,
        }
    }

    pub fn solve(self, instance: &Instance) -> (Selection, SearchStats) {
        match self {
            Policy::FullOptimal => (solve_p1(instance), SearchStats::default()),
            Policy::EeSuboptimal => (solve_p2_suboptimal(instance), SearchStats::default()),
            Policy::EeOptimal => solve_p2_optimal(instance),
        }
    }
}

/// One completed task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyRecord {
    pub id: u64,
    pub arrival_s: f64,
    /// Arrival to result.
    pub latency_s: f64,
    pub exit_point: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimMetrics {
    pub generated: u64,
    pub completed: u64,
    pub dropped: u64,
    pub completion_rate: f64,
    pub latencies: Vec<LatencyRecord>,
    pub search: SearchStats,
    pub epochs: u64,
    /// Selections that failed [`check_feasible`]. Always 0 for correct solvers.
    pub infeasible_selections: u64,
    /// Scheduled tasks that finished after their deadline. Always 0 for the
    /// epoch policies.
    pub deadline_misses: u64,
}

impl SimMetrics {
    fn finish(mut self, generated: usize) -> Self {
        self.generated = generated as u64;
        self.completion_rate = if generated == 0 { 0.0 } else { self.completed as f64 / generated as f64 };
        self
    }

    /// Every generated task was counted exactly once.
    pub fn is_conserved(&self) -> bool {
        self.completed + self.dropped == self.generated
    }
}

/// Shortest compute a task can ever receive: a batch of one through its
/// blocks (all blocks in full-network mode).
pub fn min_compute_time(profile: &LatencyProfile, task: &TaskRequest, mode: ComputeMode) -> f64 {
    match mode {
        ComputeMode::FullNetwork => profile.full_time(1),
        ComputeMode::EarlyExit => profile.tightened_time(task.exit_point, 1),
    }
}

/// Runs `policy` over the scenario's workload.
pub fn run_policy_sim(scenario: &Scenario, policy: Policy) -> SimMetrics {
    run_policy_sim_observed(scenario, policy, |_, _| {})
}

/// As [`run_policy_sim`], calling `observe(instance, selection)` at every
/// epoch that had pending tasks.
pub fn run_policy_sim_observed<F>(scenario: &Scenario, policy: Policy, mut observe: F) -> SimMetrics
where
    F: FnMut(&Instance, &Selection),
{
    let arrivals = generate_workload(scenario);
    let config = scenario.config;
    let profile = &scenario.profile;
    let mode = policy.mode();
    let early_exit = mode == ComputeMode::EarlyExit;
    let period = config.comm_slot_s.max(config.comp_slot_s);

    let mut metrics = SimMetrics::default();
    let mut pending: Vec<usize> = Vec::new();
    let mut next = 0;
    let mut epoch: u64 = 0;
    loop {
        let start = epoch as f64 * period;
        while next < arrivals.len() && arrivals[next].arrival_s <= start {
            pending.push(next);
            next += 1;
        }
        if pending.is_empty() && next == arrivals.len() {
            break;
        }
        let waiting = |i: usize| TaskRequest { waiting_s: start - arrivals[i].arrival_s, ..arrivals[i].task.clone() };
        pending.retain(|&i| {
            let task = waiting(i);
            let alive = config.fits_latency(min_compute_time(profile, &task, mode), latency_budget(&task, &config));
            if !alive {
                metrics.dropped += 1;
            }
            alive
        });
        if !pending.is_empty() {
            let tasks = pending.iter().map(|&i| waiting(i)).collect();
            let instance = Instance::new(config, profile.clone(), tasks).expect("generated tasks are valid");
            let (selection, stats) = policy.solve(&instance);
            metrics.search.absorb(&stats);
            observe(&instance, &selection);
            if !check_feasible(&selection, &instance, early_exit).unwrap_or(false) {
                metrics.infeasible_selections += 1;
            }
            for (&id, &compute_s) in &selection.predicted_compute_s {
                let i = id as usize;
                let arrival = &arrivals[i];
                let latency_s = start + config.comm_slot_s + compute_s - arrival.arrival_s;
                if latency_s <= arrival.task.deadline_s + config.latency_tolerance_s {
                    metrics.completed += 1;
                    let exit_point = match mode {
                        ComputeMode::FullNetwork => profile.depth(),
                        ComputeMode::EarlyExit => arrival.task.exit_point,
                    };
                    metrics.latencies.push(LatencyRecord { id, arrival_s: arrival.arrival_s, latency_s, exit_point });
                } else {
                    metrics.deadline_misses += 1;
                    metrics.dropped += 1;
                }
            }
            pending.retain(|&i| !selection.predicted_compute_s.contains_key(&(i as u64)));
        }
        epoch += 1;
    }
    metrics.epochs = epoch;
    metrics.finish(arrivals.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::min_bandwidth_fraction;

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(Policy::parse(p.name()), Some(p));
        }
        assert_eq!(Policy::parse("fifo"), None);
    }

    #[test]
    fn every_run_conserves_and_meets_deadlines() {
        for policy in Policy::ALL {
            let m = run_policy_sim(&Scenario::standard(120.0, 5.0, 4), policy);
            assert!(m.generated > 0);
            assert!(m.is_conserved(), "{policy:?}");
            assert_eq!(m.infeasible_selections, 0);
            assert_eq!(m.deadline_misses, 0);
            assert_eq!(m.completed as usize, m.latencies.len());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let s = Scenario::standard(80.0, 4.0, 9);
        assert_eq!(run_policy_sim(&s, Policy::EeOptimal), run_policy_sim(&s, Policy::EeOptimal));
    }

    #[test]
    fn no_band_means_no_completions() {
        let mut s = Scenario::standard(50.0, 3.0, 1);
        s.feature_bits = 10_000_000_000;
        let m = run_policy_sim(&s, Policy::FullOptimal);
        assert!(m.generated > 0);
        assert_eq!(m.completed, 0);
        assert!(m.is_conserved());
    }

    #[test]
    fn light_load_serves_every_individually_feasible_task() {
        // Budgets always equal the slot, so only the band can exclude a task.
        let mut s = Scenario::standard(0.5, 200.0, 3);
        s.deadline_dist = UniformRange::new(1.0, 2.0);
        let arrivals = generate_workload(&s);
        let feasible = arrivals
            .iter()
            .filter(|a| min_bandwidth_fraction(&a.task, &s.config).unwrap() <= 1.0)
            .count();
        let m = run_policy_sim(&s, Policy::FullOptimal);
        assert_eq!(m.completed as usize, feasible);
    }

    #[test]
    fn observer_sees_every_busy_epoch() {
        let s = Scenario::standard(60.0, 2.0, 5);
        let mut calls = 0;
        let m = run_policy_sim_observed(&s, Policy::EeSuboptimal, |inst, sel| {
            calls += 1;
            assert!(sel.len() <= inst.len());
        });
        assert!(calls > 0 && calls as u64 <= m.epochs);
    }
}

//! Optimal scheduling when every task runs the whole network.
//!
//! With the batch size fixed at `n`, the latency constraint reduces to the
//! threshold `f(n) <= budget_k`, so the best `n`-subset is simply the `n`
//! cheapest (by `rho_min`) tasks above the threshold. Growing `n` one step at
//! a time until that pick stops fitting in the band gives the maximum.

use crate::model::{ComputeMode, Instance, Selection, TaskId};

/// Tasks whose budget covers a batch of `n`, in bandwidth order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    pub n: usize,
    pub members: Vec<TaskId>,
}

pub fn feasible_set(instance: &Instance, n: usize) -> FeasibleSet {
    let threshold = instance.profile().full_time(n);
    let members = instance
        .bandwidth_order()
        .into_iter()
        .filter(|&i| instance.fits_latency(threshold, instance.latency_budget(i)))
        .map(|i| instance.task(i).id)
        .collect();
    FeasibleSet { n, members }
}

/// Is there an `n`-task subset meeting both constraints? Returns the witness
/// made of the `n` lowest-`rho_min` feasible tasks.
pub fn solve_p3(instance: &Instance, n: usize) -> Option<Selection> {
    pick_cheapest(instance, &instance.bandwidth_order(), n).map(|picked| {
        Selection::from_positions(instance, &picked, ComputeMode::FullNetwork)
    })
}

/// Maximum-cardinality schedule for full-network inference.
pub fn solve_p1(instance: &Instance) -> Selection {
    let order = instance.bandwidth_order();
    let mut best: Vec<usize> = Vec::new();
    for n in 1..=instance.len() {
        match pick_cheapest(instance, &order, n) {
            Some(picked) => best = picked,
            None => break,
        }
    }
    Selection::from_positions(instance, &best, ComputeMode::FullNetwork)
}

/// First `n` tasks of `order` whose budget covers `f(n)`, if they fit the band.
fn pick_cheapest(instance: &Instance, order: &[usize], n: usize) -> Option<Vec<usize>> {
    if n > instance.len() {
        return None;
    }
    let threshold = instance.profile().full_time(n);
    let mut picked = Vec::with_capacity(n);
    let mut used = 0.0;
    for &i in order {
        if picked.len() == n {
            break;
        }
        if instance.fits_latency(threshold, instance.latency_budget(i)) {
            picked.push(i);
            used += instance.rho_min(i);
        }
    }
    (picked.len() == n && instance.fits_bandwidth(used)).then_some(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LatencyProfile, LinkQuality, SystemConfig, TaskRequest};

    /// `f(n) = 0.1 + 0.05 n`, `T = 0.5`, tasks built from (rho, budget).
    fn instance(spec: &[(f64, f64)]) -> Instance {
        let config = SystemConfig::new(1e6, 0.5).unwrap();
        let profile = LatencyProfile::linear(&[0.1], &[0.05], None).unwrap();
        let tasks = spec
            .iter()
            .enumerate()
            .map(|(i, &(rho, budget))| TaskRequest {
                id: i as u64 + 1,
                link: LinkQuality::Snr { snr: 1.0 },
                feature_bits: (rho * 0.5 * 1e6).round() as u64,
                deadline_s: budget + 0.5,
                waiting_s: 0.0,
                exit_point: 1,
                accuracy_req: None,
            })
            .collect();
        Instance::new(config, profile, tasks).unwrap()
    }

    fn worked() -> Instance {
        instance(&[(0.3, 0.5), (0.3, 0.2), (0.3, 0.14), (0.3, 0.3)])
    }

    #[test]
    fn p3_picks_cheapest_feasible_with_id_ties() {
        let sel = solve_p3(&worked(), 2).unwrap();
        assert_eq!(sel.selected_ids, vec![1, 2]);
        assert!((sel.total_bandwidth() - 0.6).abs() < 1e-12);
        assert!(solve_p3(&worked(), 3).is_none());
        assert!(solve_p3(&worked(), 5).is_none());
    }

    #[test]
    fn feasible_set_threshold() {
        assert_eq!(feasible_set(&worked(), 2).members, vec![1, 2, 4]);
        assert_eq!(feasible_set(&worked(), 3).members, vec![1, 4]);
    }

    #[test]
    fn p3_single_task_below_threshold() {
        assert!(solve_p3(&instance(&[(0.1, 0.14)]), 1).is_none());
    }

    #[test]
    fn p1_examples() {
        assert_eq!(solve_p1(&worked()).len(), 2);
        assert!(solve_p1(&instance(&[])).is_empty());
        assert_eq!(solve_p1(&instance(&[(0.9, 0.2)])).selected_ids, vec![1]);
        assert!(solve_p1(&instance(&[(1.2, 0.5)])).is_empty());
    }

    #[test]
    fn p1_bandwidth_limits_before_latency() {
        let inst = instance(&[(0.4, 0.5), (0.4, 0.5), (0.3, 0.5), (0.35, 0.5)]);
        let sel = solve_p1(&inst);
        assert_eq!(sel.selected_ids, vec![3, 4]);
        assert!(sel.predicted_compute_s.values().all(|&t| (t - 0.2).abs() < 1e-12));
    }
}

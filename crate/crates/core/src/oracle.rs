//! Reference solvers for certification: exhaustive subset enumeration and an
//! unpruned tree search written independently of [`crate::solver_ee`].

use thiserror::Error;

use crate::model::{positions_feasible, ComputeMode, Instance, Selection, TaskId};
use crate::solver_ee::{solve_p5_greedy, SearchStats};

/// Largest instance [`brute_force_max`] accepts.
pub const MAX_BRUTE_FORCE_TASKS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{tasks} tasks exceed the brute-force limit of {limit}")]
    TooManyTasks { tasks: usize, limit: usize },
    #[error("tree search stopped after {cap} nodes")]
    NodeCapExceeded { cap: u64, partial: SearchStats },
}

/// Maximum-cardinality feasible subset by enumerating all `2^K` subsets.
/// Among maximal subsets the lexicographically smallest id list wins.
pub fn brute_force_max(instance: &Instance, early_exit: bool) -> Result<Selection, OracleError> {
    let k = instance.len();
    if k > MAX_BRUTE_FORCE_TASKS {
        return Err(OracleError::TooManyTasks { tasks: k, limit: MAX_BRUTE_FORCE_TASKS });
    }
    let mode = if early_exit { ComputeMode::EarlyExit } else { ComputeMode::FullNetwork };
    // Positions sorted by id so that a position mask orders like the id list.
    let mut by_id: Vec<usize> = (0..k).collect();
    by_id.sort_by_key(|&i| instance.task(i).id);
    let rho: Vec<f64> = by_id.iter().map(|&i| instance.rho_min(i)).collect();
    // Incremental sums drift; only use them to skip clear violations.
    let loose = 1.0 + instance.config().bandwidth_tolerance + 1e-6;

    let mut best: Vec<usize> = Vec::new();
    let mut best_ids: Vec<TaskId> = Vec::new();
    let mut mask: u32 = 0;
    let mut used = 0.0;
    let mut members = 0usize;
    let mut subset = Vec::with_capacity(k);
    for step in 1u64..(1u64 << k) {
        let bit = step.trailing_zeros() as usize;
        mask ^= 1 << bit;
        if mask & (1 << bit) != 0 {
            used += rho[bit];
            members += 1;
        } else {
            used -= rho[bit];
            members -= 1;
        }
        if members < best.len() || (instance.bandwidth_limited() && used > loose) {
            continue;
        }
        subset.clear();
        subset.extend((0..k).filter(|b| mask & (1 << b) != 0).map(|b| by_id[b]));
        let ids: Vec<TaskId> = subset.iter().map(|&i| instance.task(i).id).collect();
        if members == best.len() && ids >= best_ids {
            continue;
        }
        if positions_feasible(instance, &subset, early_exit) {
            best.clone_from(&subset);
            best_ids = ids;
        }
    }
    Ok(Selection::from_positions(instance, &best, mode))
}

/// Most tasks that fit the band at all, ignoring latency.
pub fn bandwidth_knapsack_max(instance: &Instance) -> usize {
    let mut rho: Vec<f64> = (0..instance.len()).map(|i| instance.rho_min(i)).collect();
    rho.sort_by(f64::total_cmp);
    let mut used = 0.0;
    rho.iter()
        .take_while(|&&r| {
            used += r;
            instance.fits_bandwidth(used)
        })
        .count()
}

/// Largest `n` reached by calling the greedy latency-only solver for
/// `n = 1, 2, ...` until it first fails.
pub fn greedy_max_cardinality(instance: &Instance) -> usize {
    (1..=instance.len()).take_while(|&n| solve_p5_greedy(instance, n).is_some()).last().unwrap_or(0)
}

struct Tree<'a> {
    instance: &'a Instance,
    groups: Vec<Vec<usize>>,
    n: usize,
}

impl<'a> Tree<'a> {
    fn new(instance: &'a Instance, n: usize) -> Self {
        let mut groups = vec![Vec::new(); instance.depth()];
        for i in 0..instance.len() {
            groups[instance.exit_point(i) - 1].push(i);
        }
        for g in &mut groups {
            g.sort_by(|&a, &b| {
                instance
                    .rho_min(a)
                    .partial_cmp(&instance.rho_min(b))
                    .expect("finite rho")
                    .then(instance.task(a).id.cmp(&instance.task(b).id))
            });
        }
        Self { instance, groups, n }
    }

    /// Feasible members of the next group below `path`, cheapest first.
    fn next_feasible(&self, path: &[usize]) -> Vec<usize> {
        let profile = self.instance.profile();
        let mut elapsed = 0.0;
        let mut remaining = self.n;
        for (d, &v) in path.iter().enumerate() {
            elapsed += profile.block_time(d + 1, remaining);
            remaining -= v;
        }
        let finish = elapsed + profile.block_time(path.len() + 1, remaining);
        self.groups[path.len()]
            .iter()
            .copied()
            .filter(|&i| self.instance.fits_latency(finish, self.instance.latency_budget(i)))
            .collect()
    }

    fn remaining(&self, path: &[usize]) -> usize {
        self.n - path.iter().sum::<usize>()
    }

    fn search(
        &self,
        path: &mut Vec<usize>,
        chosen: &mut Vec<usize>,
        stats: &mut SearchStats,
        cap: u64,
    ) -> Result<Option<Vec<usize>>, OracleError> {
        stats.nodes_visited += 1;
        if stats.nodes_visited > cap {
            return Err(OracleError::NodeCapExceeded { cap, partial: *stats });
        }
        let remaining = self.remaining(path);
        if remaining == 0 {
            stats.solutions_checked += 1;
            let used: f64 = chosen.iter().map(|&i| self.instance.rho_min(i)).sum();
            return Ok(self.instance.fits_bandwidth(used).then(|| chosen.clone()));
        }
        if path.len() == self.instance.depth() {
            return Ok(None);
        }
        let feasible = self.next_feasible(path);
        let top = remaining.min(feasible.len());
        for j in (0..=top).rev() {
            path.push(j);
            let mark = chosen.len();
            chosen.extend_from_slice(&feasible[..j]);
            let found = self.search(path, chosen, stats, cap)?;
            chosen.truncate(mark);
            path.pop();
            if found.is_some() {
                return Ok(found);
            }
        }
        Ok(None)
    }

    fn has_latency_solution(&self, path: &mut Vec<usize>) -> bool {
        let remaining = self.remaining(path);
        if remaining == 0 {
            return true;
        }
        if path.len() == self.instance.depth() {
            return false;
        }
        let top = remaining.min(self.next_feasible(path).len());
        (0..=top).rev().any(|j| {
            path.push(j);
            let found = self.has_latency_solution(path);
            path.pop();
            found
        })
    }
}

/// Depth-first search in the same child order as the pruned solver, with no
/// fathoming and no bandwidth cutoff.
pub fn exhaustive_tree_search(
    instance: &Instance,
    n: usize,
    node_cap: u64,
) -> Result<(Option<Selection>, SearchStats), OracleError> {
    let mut stats = SearchStats::default();
    if n > instance.len() {
        return Ok((None, stats));
    }
    let tree = Tree::new(instance, n);
    let found = tree.search(&mut Vec::new(), &mut Vec::new(), &mut stats, node_cap)?;
    Ok((found.map(|p| Selection::from_positions(instance, &p, ComputeMode::EarlyExit)), stats))
}

/// Does any node below `path` hold `n` tasks meeting every latency
/// constraint? Bandwidth is ignored.
pub fn subtree_has_latency_solution(instance: &Instance, n: usize, path: &[usize]) -> bool {
    let tree = Tree::new(instance, n);
    let mut path = path.to_vec();
    if path.iter().sum::<usize>() > n || path.len() > instance.depth() {
        return false;
    }
    tree.has_latency_solution(&mut path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LatencyProfile, LinkQuality, SystemConfig, TaskRequest};
    use crate::solver_ee::solve_p4_tree;

    fn instance(spec: &[(usize, f64, f64)]) -> Instance {
        let config = SystemConfig::new(1e6, 0.5).unwrap();
        let profile = LatencyProfile::linear(&[0.0, 0.0], &[0.05, 0.05], None).unwrap();
        let tasks = spec
            .iter()
            .enumerate()
            .map(|(i, &(exit, budget, rho))| TaskRequest {
                id: i as u64 + 1,
                link: LinkQuality::Snr { snr: 1.0 },
                feature_bits: (rho * 0.5e6).round() as u64,
                deadline_s: budget + 0.5,
                waiting_s: 0.0,
                exit_point: exit,
                accuracy_req: None,
            })
            .collect();
        Instance::new(config, profile, tasks).unwrap()
    }

    fn worked() -> Instance {
        instance(&[(1, 0.2, 0.5), (1, 0.1, 0.2), (2, 0.25, 0.4), (2, 0.4, 0.3)])
    }

    #[test]
    fn brute_force_examples() {
        assert!(brute_force_max(&instance(&[]), true).unwrap().is_empty());
        let best = brute_force_max(&worked(), true).unwrap();
        assert_eq!(best.selected_ids, vec![1, 2]);
        assert!(brute_force_max(&instance(&[(1, 0.4, 1.5)]), true).unwrap().is_empty());
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let spec = vec![(1, 0.4, 0.01); MAX_BRUTE_FORCE_TASKS + 1];
        assert!(matches!(brute_force_max(&instance(&spec), false), Err(OracleError::TooManyTasks { .. })));
    }

    #[test]
    fn brute_force_prefers_smallest_ids() {
        let inst = instance(&[(1, 0.4, 0.6), (1, 0.4, 0.6), (1, 0.4, 0.6)]);
        assert_eq!(brute_force_max(&inst, false).unwrap().selected_ids, vec![1]);
    }

    #[test]
    fn exhaustive_visits_whole_worked_tree() {
        let (sel, stats) = exhaustive_tree_search(&worked(), 3, 1_000).unwrap();
        assert!(sel.is_none());
        assert_eq!(stats.nodes_visited, 8);
        let (_, pruned) = solve_p4_tree(&worked(), 3, true);
        assert!(pruned.nodes_visited < stats.nodes_visited);
    }

    #[test]
    fn exhaustive_matches_on_greedy_success() {
        let inst = instance(&[(1, 0.2, 0.1), (1, 0.1, 0.1), (2, 0.25, 0.1), (2, 0.4, 0.1)]);
        let (sel, stats) = exhaustive_tree_search(&inst, 3, 1_000).unwrap();
        let (pruned_sel, pruned) = solve_p4_tree(&inst, 3, true);
        assert_eq!(sel, pruned_sel);
        assert_eq!(stats.nodes_visited, pruned.nodes_visited);
    }

    #[test]
    fn node_cap_reports_partial_stats() {
        match exhaustive_tree_search(&worked(), 3, 4) {
            Err(OracleError::NodeCapExceeded { cap: 4, partial }) => assert_eq!(partial.nodes_visited, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn latency_solution_below_paths() {
        let inst = worked();
        assert!(subtree_has_latency_solution(&inst, 3, &[]));
        assert!(subtree_has_latency_solution(&inst, 3, &[1]));
        assert!(!subtree_has_latency_solution(&inst, 3, &[1, 0]));
        assert!(!subtree_has_latency_solution(&inst, 3, &[0]));
    }

    #[test]
    fn knapsack_bound() {
        assert_eq!(bandwidth_knapsack_max(&worked()), 3);
        assert_eq!(bandwidth_knapsack_max(&worked().without_bandwidth_limit()), 4);
    }
}

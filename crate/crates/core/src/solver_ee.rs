//! Schedulers for early-exit inference.
//!
//! Three solvers share the same building blocks:
//!
//! * [`solve_p2_suboptimal`] pretends every block runs at the full batch size
//!   `n`, which restores the threshold structure of the full-network case.
//! * [`solve_p5_greedy`] ignores bandwidth and fills exit groups shallow-first,
//!   taking every latency-feasible task of a group before moving deeper.
//! * [`solve_p2_optimal`] runs a depth-first search over per-group
//!   cardinalities for each `n`, visiting the greedy branch first and pruning
//!   siblings of nodes that cannot complete a latency-feasible schedule.
//!
//! Within a group, the concrete tasks for a given cardinality are always the
//! cheapest ones in `rho_min` (ties by id). Later blocks only see how many
//! tasks were taken, never which ones.

use serde::Serialize;

use crate::model::{ComputeMode, Instance, Selection, TaskId};

/// Task positions split by exit point, each group in bandwidth order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitGroups {
    groups: Vec<Vec<usize>>,
}

impl ExitGroups {
    pub fn new(instance: &Instance) -> Self {
        let mut groups = vec![Vec::new(); instance.depth()];
        for i in instance.bandwidth_order() {
            groups[instance.exit_point(i) - 1].push(i);
        }
        Self { groups }
    }

    pub fn depth(&self) -> usize {
        self.groups.len()
    }

    /// Group of tasks exiting after 1-based block `m`.
    pub fn group(&self, m: usize) -> &[usize] {
        &self.groups[m - 1]
    }

    pub fn ids(&self, instance: &Instance, m: usize) -> Vec<TaskId> {
        self.group(m).iter().map(|&i| instance.task(i).id).collect()
    }
}

/// Tasks meeting the tightened constraint `sum_{d <= d_k} f_d(n) <= budget_k`,
/// in bandwidth order.
pub fn tightened_feasible_set(instance: &Instance, n: usize) -> Vec<TaskId> {
    let times = tightened_times(instance, n);
    instance
        .bandwidth_order()
        .into_iter()
        .filter(|&i| instance.fits_latency(times[instance.exit_point(i) - 1], instance.latency_budget(i)))
        .map(|i| instance.task(i).id)
        .collect()
}

fn tightened_times(instance: &Instance, n: usize) -> Vec<f64> {
    (1..=instance.depth()).map(|exit| instance.profile().tightened_time(exit, n)).collect()
}

/// Full-network search with the tightened feasible set. Exploits early
/// feedback but not the shrinking batch.
pub fn solve_p2_suboptimal(instance: &Instance) -> Selection {
    let order = instance.bandwidth_order();
    let mut best: Vec<usize> = Vec::new();
    'grow: for n in 1..=instance.len() {
        let times = tightened_times(instance, n);
        let mut picked = Vec::with_capacity(n);
        let mut used = 0.0;
        for &i in &order {
            if picked.len() == n {
                break;
            }
            if instance.fits_latency(times[instance.exit_point(i) - 1], instance.latency_budget(i)) {
                picked.push(i);
                used += instance.rho_min(i);
            }
        }
        if picked.len() < n || !instance.fits_bandwidth(used) {
            break 'grow;
        }
        best = picked;
    }
    Selection::from_positions(instance, &best, ComputeMode::EarlyExit)
}

/// Latency-only feasibility for exactly `n` tasks, bandwidth ignored.
pub fn solve_p5_greedy(instance: &Instance, n: usize) -> Option<Selection> {
    let groups = ExitGroups::new(instance);
    greedy_positions(instance, &groups, n).map(|p| Selection::from_positions(instance, &p, ComputeMode::EarlyExit))
}

fn greedy_positions(instance: &Instance, groups: &ExitGroups, n: usize) -> Option<Vec<usize>> {
    if n > instance.len() {
        return None;
    }
    let mut chosen = Vec::with_capacity(n);
    let mut remaining = n;
    let mut elapsed = 0.0;
    for block in 1..=groups.depth() {
        if remaining == 0 {
            break;
        }
        let block_s = instance.profile().block_time(block, remaining);
        let feasible = feasible_in_group(instance, groups.group(block), elapsed + block_s);
        if feasible.len() >= remaining {
            chosen.extend_from_slice(&feasible[..remaining]);
            return Some(chosen);
        }
        remaining -= feasible.len();
        chosen.extend(feasible);
        elapsed += block_s;
    }
    (remaining == 0).then_some(chosen)
}

fn feasible_in_group(instance: &Instance, group: &[usize], finish_s: f64) -> Vec<usize> {
    group.iter().copied().filter(|&i| instance.fits_latency(finish_s, instance.latency_budget(i))).collect()
}

/// Node-visit counters for one or more tree searches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub nodes_visited: u64,
    pub nodes_fathomed_without_visit: u64,
    pub solutions_checked: u64,
    pub bandwidth_cutoffs: u64,
    pub pruning_enabled: bool,
}

impl SearchStats {
    pub fn absorb(&mut self, other: &SearchStats) {
        self.nodes_visited += other.nodes_visited;
        self.nodes_fathomed_without_visit += other.nodes_fathomed_without_visit;
        self.solutions_checked += other.solutions_checked;
        self.bandwidth_cutoffs += other.bandwidth_cutoffs;
        self.pruning_enabled |= other.pruning_enabled;
    }
}

/// Flat benchmark record for one `(instance, n)` search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchRecord {
    pub instance_id: String,
    pub n: usize,
    pub pruning: bool,
    pub nodes_visited: u64,
}

impl SearchRecord {
    pub fn new(instance_id: impl Into<String>, n: usize, stats: &SearchStats) -> Self {
        Self { instance_id: instance_id.into(), n, pruning: stats.pruning_enabled, nodes_visited: stats.nodes_visited }
    }
}

/// A partial schedule: `path[m - 1]` tasks taken from exit group `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub path: Vec<usize>,
    pub selected_count: usize,
    pub used_bandwidth: f64,
    pub fathomed: bool,
    chosen: Vec<usize>,
    elapsed_s: f64,
}

impl SearchNode {
    pub fn root() -> Self {
        Self { path: Vec::new(), selected_count: 0, used_bandwidth: 0.0, fathomed: false, chosen: Vec::new(), elapsed_s: 0.0 }
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    /// Task positions selected along the path.
    pub fn chosen(&self) -> &[usize] {
        &self.chosen
    }

    /// Time until the last block on the path finishes.
    pub fn elapsed_s(&self) -> f64 {
        self.elapsed_s
    }
}

/// Outcome of visiting one node.
#[derive(Debug, Clone, PartialEq)]
pub enum Visit {
    /// The path already holds `n` tasks; `within_bandwidth` is the band check.
    Solution { positions: Vec<usize>, within_bandwidth: bool },
    /// Deepest block reached with fewer than `n` tasks. Fathomed.
    DeadEnd,
    /// Children ordered from the largest cardinality down to zero.
    Branch { feasible: Vec<usize>, children: Vec<SearchNode> },
}

impl Visit {
    pub fn is_fathomed(&self) -> bool {
        matches!(self, Visit::DeadEnd)
    }
}

/// Classifies `node` for batch size `n` and lists its children.
pub fn visit_node(node: &SearchNode, instance: &Instance, n: usize) -> Visit {
    let groups = ExitGroups::new(instance);
    let search = TreeSearch::with_groups(instance, groups);
    if node.selected_count == n {
        return Visit::Solution { positions: node.chosen.clone(), within_bandwidth: instance.fits_bandwidth(node.used_bandwidth) };
    }
    if node.depth() == instance.depth() {
        return Visit::DeadEnd;
    }
    let expansion = search.expand(node, n);
    let children = (0..=expansion.max_index()).rev().map(|j| expansion.child(j)).collect();
    Visit::Branch { feasible: expansion.feasible.clone(), children }
}

struct Expansion {
    parent: SearchNode,
    feasible: Vec<usize>,
    /// `prefix_rho[j]` is the bandwidth of the `j` cheapest feasible tasks.
    prefix_rho: Vec<f64>,
    block_s: f64,
    max_index: usize,
}

impl Expansion {
    fn max_index(&self) -> usize {
        self.max_index
    }

    fn child_bandwidth(&self, j: usize) -> f64 {
        self.parent.used_bandwidth + self.prefix_rho[j]
    }

    fn child(&self, j: usize) -> SearchNode {
        let mut path = self.parent.path.clone();
        path.push(j);
        let mut chosen = self.parent.chosen.clone();
        chosen.extend_from_slice(&self.feasible[..j]);
        SearchNode {
            path,
            selected_count: self.parent.selected_count + j,
            used_bandwidth: self.child_bandwidth(j),
            fathomed: false,
            chosen,
            elapsed_s: self.parent.elapsed_s + self.block_s,
        }
    }
}

/// Result of one tree search for a fixed `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeOutcome {
    pub selection: Option<Selection>,
    pub stats: SearchStats,
    /// Paths of siblings pruned without a visit; filled only when tracing.
    pub fathomed_unvisited: Vec<Vec<usize>>,
}

/// Depth-first search over per-group cardinalities.
///
/// With fathoming on, a fathomed child prunes every lower-index sibling and a
/// node whose children are all fathomed is fathomed itself. The bandwidth
/// cutoff skips internal nodes already over the band; such nodes are not
/// fathomed, since fathoming is a latency-only property.
#[derive(Debug, Clone)]
pub struct TreeSearch<'a> {
    instance: &'a Instance,
    groups: ExitGroups,
    fathoming: bool,
    bandwidth_cutoff: bool,
    trace: bool,
}

struct Frame {
    expansion: Expansion,
    next: Option<usize>,
    all_fathomed: bool,
}

impl<'a> TreeSearch<'a> {
    /// Fathoming and bandwidth cutoff both on, tracing off.
    pub fn new(instance: &'a Instance) -> Self {
        Self::with_groups(instance, ExitGroups::new(instance))
    }

    fn with_groups(instance: &'a Instance, groups: ExitGroups) -> Self {
        Self { instance, groups, fathoming: true, bandwidth_cutoff: true, trace: false }
    }

    pub fn fathoming(mut self, on: bool) -> Self {
        self.fathoming = on;
        self
    }

    pub fn bandwidth_cutoff(mut self, on: bool) -> Self {
        self.bandwidth_cutoff = on;
        self
    }

    pub fn trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    fn expand(&self, node: &SearchNode, n: usize) -> Expansion {
        let block = node.depth() + 1;
        let remaining = n - node.selected_count;
        let block_s = self.instance.profile().block_time(block, remaining);
        let feasible = feasible_in_group(self.instance, self.groups.group(block), node.elapsed_s + block_s);
        let mut prefix_rho = Vec::with_capacity(feasible.len() + 1);
        prefix_rho.push(0.0);
        let mut acc = 0.0;
        for &i in &feasible {
            acc += self.instance.rho_min(i);
            prefix_rho.push(acc);
        }
        let max_index = remaining.min(feasible.len());
        Expansion { parent: node.clone(), feasible, prefix_rho, block_s, max_index }
    }

    fn frame(&self, node: &SearchNode, n: usize) -> Frame {
        let expansion = self.expand(node, n);
        let next = Some(expansion.max_index);
        Frame { expansion, next, all_fathomed: true }
    }

    /// Finds an `n`-task schedule meeting both constraints, if one exists.
    pub fn run(&self, n: usize) -> TreeOutcome {
        let instance = self.instance;
        let depth = instance.depth();
        let mut stats = SearchStats { pruning_enabled: self.fathoming, ..Default::default() };
        let mut fathomed_unvisited = Vec::new();
        let done = |selection: Option<Selection>, stats, fathomed_unvisited| TreeOutcome { selection, stats, fathomed_unvisited };
        if n == 0 {
            return done(Some(Selection::empty(instance, ComputeMode::EarlyExit)), stats, fathomed_unvisited);
        }
        if n > instance.len() {
            return done(None, stats, fathomed_unvisited);
        }

        stats.nodes_visited += 1;
        let mut stack = vec![self.frame(&SearchNode::root(), n)];
        while let Some(top) = stack.last_mut() {
            let Some(j) = top.next else {
                let finished = stack.pop().expect("non-empty stack");
                if let Some(parent) = stack.last_mut() {
                    self.child_finished(parent, finished.all_fathomed, &mut stats, &mut fathomed_unvisited);
                }
                continue;
            };
            top.next = j.checked_sub(1);
            let exp = &top.expansion;
            let count = exp.parent.selected_count + j;
            let child_depth = exp.parent.depth() + 1;
            let internal = count < n && child_depth < depth;
            if internal && self.bandwidth_cutoff && !instance.fits_bandwidth(exp.child_bandwidth(j)) {
                stats.bandwidth_cutoffs += 1;
                top.all_fathomed = false;
                continue;
            }
            stats.nodes_visited += 1;
            if count == n {
                stats.solutions_checked += 1;
                if instance.fits_bandwidth(exp.child_bandwidth(j)) {
                    let child = exp.child(j);
                    let selection = Selection::from_positions(instance, &child.chosen, ComputeMode::EarlyExit);
                    return done(Some(selection), stats, fathomed_unvisited);
                }
                top.all_fathomed = false;
            } else if child_depth == depth {
                self.child_finished(top, true, &mut stats, &mut fathomed_unvisited);
            } else {
                let child = exp.child(j);
                let frame = self.frame(&child, n);
                stack.push(frame);
            }
        }
        done(None, stats, fathomed_unvisited)
    }

    fn child_finished(&self, parent: &mut Frame, fathomed: bool, stats: &mut SearchStats, trace: &mut Vec<Vec<usize>>) {
        if !fathomed {
            parent.all_fathomed = false;
            return;
        }
        if !self.fathoming {
            return;
        }
        // Every sibling with a smaller index is fathomed too.
        if let Some(j) = parent.next.take() {
            stats.nodes_fathomed_without_visit += j as u64 + 1;
            if self.trace {
                for s in (0..=j).rev() {
                    let mut path = parent.expansion.parent.path.clone();
                    path.push(s);
                    trace.push(path);
                }
            }
        }
    }

    /// Sequential `n = 1, 2, ...` until the first infeasible `n`.
    pub fn solve_max(&self) -> (Selection, SearchStats) {
        let mut best = Selection::empty(self.instance, ComputeMode::EarlyExit);
        let mut total = SearchStats { pruning_enabled: self.fathoming, ..Default::default() };
        for n in 1..=self.instance.len() {
            let outcome = self.run(n);
            total.absorb(&outcome.stats);
            match outcome.selection {
                Some(selection) => best = selection,
                None => break,
            }
        }
        (best, total)
    }
}

/// Tree search for exactly `n` tasks. `pruning` toggles both sibling
/// fathoming and the bandwidth cutoff.
pub fn solve_p4_tree(instance: &Instance, n: usize, pruning: bool) -> (Option<Selection>, SearchStats) {
    let outcome = TreeSearch::new(instance).fathoming(pruning).bandwidth_cutoff(pruning).run(n);
    (outcome.selection, outcome.stats)
}

/// Maximum-cardinality early-exit schedule.
pub fn solve_p2_optimal(instance: &Instance) -> (Selection, SearchStats) {
    TreeSearch::new(instance).solve_max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasible, LatencyProfile, LinkQuality, SystemConfig, TaskRequest};

    /// `D = 2`, `f_1(m) = f_2(m) = 0.05 m`, `T = 0.5`; tasks are (exit, budget, rho).
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

    /// a, b exit after block 1; c, d after block 2.
    fn worked() -> Instance {
        instance(&[(1, 0.2, 0.5), (1, 0.1, 0.2), (2, 0.25, 0.4), (2, 0.4, 0.3)])
    }

    #[test]
    fn tightened_set_boundaries() {
        let inst = instance(&[(2, 0.2, 0.1), (1, 0.06, 0.1)]);
        assert_eq!(tightened_feasible_set(&inst, 2), vec![1]);
        assert!(tightened_feasible_set(&inst, 3).is_empty());
        assert_eq!(tightened_feasible_set(&inst, 1), vec![1, 2]);
    }

    #[test]
    fn greedy_worked_example() {
        let sel = solve_p5_greedy(&worked(), 3).unwrap();
        assert_eq!(sel.selected_ids, vec![1, 3, 4]);
        assert_eq!(sel.block_batch_sizes, vec![3, 2]);
        assert!(check_feasible(&sel, &worked().without_bandwidth_limit(), true).unwrap());
        assert!(solve_p5_greedy(&worked(), 5).is_none());
    }

    #[test]
    fn greedy_single_and_hopeless() {
        let inst = instance(&[(1, 0.05, 0.1)]);
        assert_eq!(solve_p5_greedy(&inst, 1).unwrap().selected_ids, vec![1]);
        let inst = instance(&[(1, 0.04, 0.1), (2, 0.04, 0.1)]);
        assert!(solve_p5_greedy(&inst, 1).is_none());
    }

    #[test]
    fn visit_root_children() {
        let v = visit_node(&SearchNode::root(), &worked(), 3);
        let Visit::Branch { feasible, children } = v else { panic!("root must branch") };
        assert_eq!(feasible, vec![0]);
        let idx: Vec<_> = children.iter().map(|c| c.path.clone()).collect();
        assert_eq!(idx, vec![vec![1], vec![0]]);
        assert!((children[0].used_bandwidth - 0.5).abs() < 1e-12);
    }

    #[test]
    fn visit_solution_and_dead_end() {
        let inst = worked();
        let Visit::Branch { children, .. } = visit_node(&SearchNode::root(), &inst, 2) else { panic!() };
        assert_eq!(children[0].path, vec![2]);
        match visit_node(&children[0], &inst, 2) {
            Visit::Solution { positions, within_bandwidth } => {
                assert_eq!(positions.len(), 2);
                assert!(within_bandwidth);
            }
            other => panic!("{other:?}"),
        }
        let Visit::Branch { children, .. } = visit_node(&SearchNode::root(), &inst, 3) else { panic!() };
        let Visit::Branch { children: grand, .. } = visit_node(&children[0], &inst, 3) else { panic!() };
        assert_eq!(grand.iter().map(|c| c.path.clone()).collect::<Vec<_>>(), vec![vec![1, 2], vec![1, 1], vec![1, 0]]);
        assert!(matches!(visit_node(&grand[0], &inst, 3), Visit::Solution { within_bandwidth: false, .. }));
        assert!(visit_node(&grand[1], &inst, 3).is_fathomed());
    }

    #[test]
    fn tree_worked_example_n3_infeasible() {
        let inst = worked();
        let out = TreeSearch::new(&inst).bandwidth_cutoff(false).trace(true).run(3);
        assert!(out.selection.is_none());
        // root, [1], [1,2], [1,1], [0], [0,1]
        assert_eq!(out.stats.nodes_visited, 6);
        assert_eq!(out.stats.solutions_checked, 1);
        assert_eq!(out.fathomed_unvisited, vec![vec![1, 0], vec![0, 0]]);

        let (sel, unpruned) = solve_p4_tree(&inst, 3, false);
        assert!(sel.is_none());
        assert_eq!(unpruned.nodes_visited, 8);
        assert_eq!(unpruned.nodes_fathomed_without_visit, 0);
    }

    #[test]
    fn tree_worked_example_n2_and_max() {
        let inst = worked();
        let (sel, stats) = solve_p4_tree(&inst, 2, true);
        let sel = sel.unwrap();
        assert_eq!(sel.selected_ids, vec![1, 2]);
        assert!((sel.total_bandwidth() - 0.7).abs() < 1e-12);
        assert_eq!(stats.nodes_visited, 2);

        let (best, _) = solve_p2_optimal(&inst);
        assert_eq!(best.selected_ids, vec![1, 2]);
        assert!(solve_p2_optimal(&instance(&[])).0.is_empty());
    }

    #[test]
    fn greedy_success_visits_only_the_greedy_path() {
        // n = 3 succeeds at depth 2 on the greedy branch: root, [1], [1,2]
        let inst = instance(&[(1, 0.2, 0.1), (1, 0.1, 0.1), (2, 0.25, 0.1), (2, 0.4, 0.1)]);
        let (sel, stats) = solve_p4_tree(&inst, 3, true);
        assert!(sel.is_some());
        assert_eq!(stats.nodes_visited, 3);
    }

    #[test]
    fn suboptimal_examples() {
        assert!(solve_p2_suboptimal(&instance(&[])).is_empty());
        // At n = 3 only a and d clear the tightened thresholds.
        let sub = solve_p2_suboptimal(&worked());
        assert_eq!(sub.len(), 2);
        assert!(check_feasible(&sub, &worked(), true).unwrap());
    }

    #[test]
    fn unlimited_bandwidth_matches_greedy() {
        let inst = worked().without_bandwidth_limit();
        let (best, _) = solve_p2_optimal(&inst);
        let greedy_max = (1..=inst.len()).take_while(|&n| solve_p5_greedy(&inst, n).is_some()).last().unwrap_or(0);
        assert_eq!(best.len(), greedy_max);
        assert_eq!(best.len(), 3);
    }
}

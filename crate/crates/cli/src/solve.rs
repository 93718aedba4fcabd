use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use edgebatch_core::format::parse_instance;
use edgebatch_core::{solve_p1, solve_p2_optimal, solve_p2_suboptimal, Instance, SearchStats, TaskId};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolvePolicy {
    /// Full-network optimum.
    P1,
    /// Early-exit with tightened thresholds.
    P2Sub,
    /// Early-exit optimum by tree search.
    P2Opt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub policy: SolvePolicy,
    pub bandwidth_limited: bool,
    pub cardinality: usize,
    pub selected_ids: Vec<TaskId>,
    pub per_depth_counts: Vec<usize>,
    pub total_bandwidth: f64,
    pub bandwidth_fractions: BTreeMap<TaskId, f64>,
    pub predicted_compute_s: BTreeMap<TaskId, f64>,
    pub nodes_visited: u64,
}

pub fn solve_instance(instance: &Instance, policy: SolvePolicy) -> SolveReport {
    let (selection, stats) = match policy {
        SolvePolicy::P1 => (solve_p1(instance), SearchStats::default()),
        SolvePolicy::P2Sub => (solve_p2_suboptimal(instance), SearchStats::default()),
        SolvePolicy::P2Opt => solve_p2_optimal(instance),
    };
    SolveReport {
        policy,
        bandwidth_limited: instance.bandwidth_limited(),
        cardinality: selection.len(),
        per_depth_counts: selection.per_depth_counts(),
        total_bandwidth: selection.total_bandwidth(),
        selected_ids: selection.selected_ids,
        bandwidth_fractions: selection.bandwidth_fractions,
        predicted_compute_s: selection.predicted_compute_s,
        nodes_visited: stats.nodes_visited,
    }
}

pub fn load_instance(path: &Path) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input { path: path.to_path_buf(), reason: e.to_string() })?;
    parse_instance(&text).map_err(|source| CliError::Schema { path: path.to_path_buf(), source })
}

pub fn cmd_solve(path: &Path, policy: SolvePolicy, no_bandwidth: bool) -> Result<SolveReport, CliError> {
    let mut instance = load_instance(path)?;
    if no_bandwidth {
        instance = instance.without_bandwidth_limit();
    }
    Ok(solve_instance(&instance, policy))
}

impl SolveReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let ids: Vec<String> = self.selected_ids.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "selected ({}): [{}]", self.cardinality, ids.join(", "));
        let _ = writeln!(out, "per-depth counts: {:?}", self.per_depth_counts);
        let _ = writeln!(out, "total bandwidth fraction: {:.6}", self.total_bandwidth);
        for (id, t) in &self.predicted_compute_s {
            let _ = writeln!(out, "  task {id}: rho {:.6}, compute {:.6} s", self.bandwidth_fractions[id], t);
        }
        let _ = writeln!(out, "nodes visited: {}", self.nodes_visited);
        out
    }
}

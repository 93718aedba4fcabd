use edgebatch_core::oracle::{exhaustive_tree_search, OracleError};
use edgebatch_core::sim::{sample_instance, Scenario};
use edgebatch_core::{solve_p4_tree, LatencyProfile, TreeSearch};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct PruningBenchSpec {
    pub scenario: Scenario,
    pub ks: Vec<usize>,
    pub ds: Vec<usize>,
    pub instances: usize,
    /// Unpruned searches visiting more nodes than this are flagged.
    pub node_cap: u64,
}

impl PruningBenchSpec {
    pub fn new(scenario: Scenario) -> Self {
        Self { scenario, ks: vec![8, 16, 32], ds: vec![3, 5], instances: 100, node_cap: 50_000_000 }
    }
}

/// Node counts of one full maximization, `n = 1, 2, ...` until infeasible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruningRow {
    pub k: usize,
    pub d: usize,
    pub instance: usize,
    pub max_cardinality: usize,
    pub pruned_nodes: u64,
    pub unpruned_nodes: u64,
    /// Unpruned over pruned; empty when capped.
    pub ratio: Option<f64>,
    pub capped: bool,
}

/// Scenario for depth `d`: the synthetic profile split into `d` blocks and
/// exits uniform over them.
pub fn depth_scenario(base: &Scenario, d: usize) -> Result<Scenario, CliError> {
    let mut s = base.clone();
    if s.profile.depth() != d {
        s.profile = LatencyProfile::synthetic_with_depth(d).map_err(|e| CliError::Usage(e.to_string()))?;
        s.exit_dist.clear();
        s.accuracy_dist = None;
    }
    Ok(s)
}

fn instance_index(k: usize, d: usize, i: usize) -> u64 {
    ((k as u64) << 40) | ((d as u64) << 32) | i as u64
}

pub fn bench_one(scenario: &Scenario, k: usize, d: usize, i: usize, node_cap: u64) -> Result<PruningRow, CliError> {
    let instance = sample_instance(scenario, k, instance_index(k, d, i));
    let (best, pruned) = TreeSearch::new(&instance).solve_max();
    let last = (best.len() + 1).min(k);
    let mut unpruned = 0u64;
    let mut capped = false;
    for n in 1..=last {
        match exhaustive_tree_search(&instance, n, node_cap.saturating_sub(unpruned)) {
            Ok((found, stats)) => {
                unpruned += stats.nodes_visited;
                let verdict = solve_p4_tree(&instance, n, true).0.is_some();
                if found.is_some() != verdict {
                    return Err(CliError::Certification(format!(
                        "pruned and exhaustive searches disagree at K={k} D={d} instance {i} n={n}"
                    )));
                }
            }
            Err(OracleError::NodeCapExceeded { partial, .. }) => {
                unpruned += partial.nodes_visited;
                capped = true;
                break;
            }
            Err(e) => return Err(CliError::Usage(e.to_string())),
        }
    }
    let ratio = (!capped && pruned.nodes_visited > 0).then(|| unpruned as f64 / pruned.nodes_visited as f64);
    Ok(PruningRow {
        k,
        d,
        instance: i,
        max_cardinality: best.len(),
        pruned_nodes: pruned.nodes_visited,
        unpruned_nodes: unpruned,
        ratio,
        capped,
    })
}

/// Rows sorted by `(K, D, instance)`.
pub fn run_pruning_bench(spec: &PruningBenchSpec) -> Result<Vec<PruningRow>, CliError> {
    let mut jobs = Vec::new();
    for &d in &spec.ds {
        let scenario = depth_scenario(&spec.scenario, d)?;
        for &k in &spec.ks {
            for i in 0..spec.instances {
                jobs.push((scenario.clone(), k, d, i));
            }
        }
    }
    let mut rows: Vec<PruningRow> = jobs
        .par_iter()
        .map(|(s, k, d, i)| bench_one(s, *k, *d, *i, spec.node_cap))
        .collect::<Result<_, _>>()?;
    rows.sort_by_key(|r| (r.k, r.d, r.instance));
    Ok(rows)
}

/// Median reduction ratio over uncapped rows.
pub fn median_ratio(rows: &[PruningRow]) -> Option<f64> {
    let mut ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_by(f64::total_cmp);
    let m = ratios.len() / 2;
    Some(if ratios.len() % 2 == 1 { ratios[m] } else { 0.5 * (ratios[m - 1] + ratios[m]) })
}

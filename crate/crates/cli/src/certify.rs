//! Solver-versus-oracle certification on seeded random instances.

use std::path::{Path, PathBuf};

use edgebatch_core::format::instance_to_json;
use edgebatch_core::oracle::{
    bandwidth_knapsack_max, brute_force_max, exhaustive_tree_search, greedy_max_cardinality, MAX_BRUTE_FORCE_TASKS,
};
use edgebatch_core::sim::stream_rng;
use edgebatch_core::{
    check_feasible, solve_p1, solve_p2_optimal, solve_p2_suboptimal, solve_p4_tree, ComputeMode, Instance,
    LatencyProfile, LinkQuality, SearchStats, Selection, SystemConfig, TaskRequest,
};
use rand::Rng;
use serde::Serialize;

use crate::error::CliError;

const CERTIFY_STREAM: u64 = 0xce27;

/// The solvers under test. Replace a field to certify another implementation.
#[derive(Clone, Copy)]
pub struct Solvers {
    pub p1: fn(&Instance) -> Selection,
    pub p2_suboptimal: fn(&Instance) -> Selection,
    pub p2_optimal: fn(&Instance) -> (Selection, SearchStats),
    pub p4_tree: fn(&Instance, usize, bool) -> (Option<Selection>, SearchStats),
}

impl Default for Solvers {
    fn default() -> Self {
        Self { p1: solve_p1, p2_suboptimal: solve_p2_suboptimal, p2_optimal: solve_p2_optimal, p4_tree: solve_p4_tree }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub max_k: usize,
    pub max_d: usize,
    pub min_d: usize,
    pub instances: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { max_k: 10, max_d: 3, min_d: 1, instances: 500, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub instance: usize,
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub instances: usize,
    pub checks: u64,
    pub failures: usize,
    pub first_failure: Option<Failure>,
    /// Instance file reproducing the first failure.
    pub reproduction: Option<PathBuf>,
}

impl CertifyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Small instance with coarse values so ties and boundary cases are common:
/// budgets are multiples of 10 ms, bandwidth fractions multiples of 0.05,
/// block times on a 5 ms grid.
pub fn random_instance(seed: u64, index: u64, max_k: usize, depths: (usize, usize)) -> Instance {
    let mut rng = stream_rng(seed, CERTIFY_STREAM, index);
    let depth = rng.random_range(depths.0..=depths.1);
    let k = rng.random_range(0..=max_k);
    let c0: Vec<f64> = (0..depth).map(|_| 0.005 * rng.random_range(0..=6) as f64).collect();
    let c1: Vec<f64> = (0..depth).map(|_| 0.005 * rng.random_range(1..=8) as f64).collect();
    let profile = LatencyProfile::linear(&c0, &c1, None).expect("valid synthetic profile");
    let config = SystemConfig::new(1e6, 0.5).expect("valid config");
    let tasks = (0..k as u64)
        .map(|id| {
            let waiting_s = 0.05 * rng.random_range(0..=4) as f64;
            let budget = 0.01 * rng.random_range(1..=50) as f64;
            TaskRequest {
                id: id + 1,
                link: LinkQuality::Snr { snr: 1.0 },
                feature_bits: 25_000 * rng.random_range(1..=12u64),
                deadline_s: budget + waiting_s + 0.5,
                waiting_s,
                exit_point: rng.random_range(1..=depth),
                accuracy_req: None,
            }
        })
        .collect();
    Instance::new(config, profile, tasks).expect("valid random instance")
}

/// Returns a description of the first violated check.
pub fn check_instance(instance: &Instance, solvers: &Solvers, checks: &mut u64) -> Option<(String, String)> {
    let fail = |name: &str, detail: String| Some((name.to_string(), detail));

    let full = brute_force_max(instance, false).expect("within brute-force guard");
    let p1 = (solvers.p1)(instance);
    *checks += 2;
    if !check_feasible(&p1, instance, false).unwrap_or(false) {
        return fail("p1-feasible", format!("{:?}", p1.selected_ids));
    }
    if p1.len() != full.len() {
        return fail("p1-optimal", format!("solver {} vs oracle {}", p1.len(), full.len()));
    }

    let ee = brute_force_max(instance, true).expect("within brute-force guard");
    let (opt, _) = (solvers.p2_optimal)(instance);
    let sub = (solvers.p2_suboptimal)(instance);
    *checks += 4;
    if !check_feasible(&opt, instance, true).unwrap_or(false) || opt.mode != ComputeMode::EarlyExit {
        return fail("p2-optimal-feasible", format!("{:?}", opt.selected_ids));
    }
    if opt.len() != ee.len() {
        return fail("p2-optimal", format!("solver {} vs oracle {}", opt.len(), ee.len()));
    }
    if !check_feasible(&sub, instance, true).unwrap_or(false) {
        return fail("p2-suboptimal-feasible", format!("{:?}", sub.selected_ids));
    }
    if sub.len() > opt.len() || opt.len() > bandwidth_knapsack_max(instance) {
        return fail("sandwich", format!("sub {} opt {}", sub.len(), opt.len()));
    }

    let unlimited = instance.clone().without_bandwidth_limit();
    let greedy = greedy_max_cardinality(&unlimited);
    let (relaxed, _) = (solvers.p2_optimal)(&unlimited);
    *checks += 1;
    if relaxed.len() != greedy {
        return fail("greedy", format!("solver {} vs greedy {}", relaxed.len(), greedy));
    }

    for n in 1..=instance.len() {
        let (reference, full_stats) = exhaustive_tree_search(instance, n, u64::MAX).expect("no cap");
        let (pruned, stats) = (solvers.p4_tree)(instance, n, true);
        *checks += 2;
        if pruned.is_some() != reference.is_some() {
            return fail("pruning-verdict", format!("n = {n}: pruned {} vs exhaustive {}", pruned.is_some(), reference.is_some()));
        }
        if stats.nodes_visited > full_stats.nodes_visited {
            return fail("pruning-visits", format!("n = {n}: {} > {}", stats.nodes_visited, full_stats.nodes_visited));
        }
    }
    None
}

/// Runs every check on `options.instances` random instances. The first
/// failing instance is written to `repro_dir`.
pub fn certify(options: &CertifyOptions, solvers: &Solvers, repro_dir: &Path) -> Result<CertifyReport, CliError> {
    if options.max_k > MAX_BRUTE_FORCE_TASKS {
        return Err(CliError::Usage(format!("--k-max must be at most {MAX_BRUTE_FORCE_TASKS}")));
    }
    if options.min_d == 0 || options.min_d > options.max_d {
        return Err(CliError::Usage("need 1 <= min depth <= max depth".into()));
    }
    let mut report = CertifyReport { instances: options.instances, checks: 0, failures: 0, first_failure: None, reproduction: None };
    for i in 0..options.instances {
        let instance = random_instance(options.seed, i as u64, options.max_k, (options.min_d, options.max_d));
        if let Some((check, detail)) = check_instance(&instance, solvers, &mut report.checks) {
            report.failures += 1;
            if report.first_failure.is_none() {
                std::fs::create_dir_all(repro_dir)?;
                let path = repro_dir.join(format!("certify-failure-seed{}-{i}.json", options.seed));
                std::fs::write(&path, instance_to_json(&instance))?;
                report.reproduction = Some(path);
                report.first_failure = Some(Failure { instance: i, check, detail });
            }
        }
    }
    Ok(report)
}

//! Parameter sweeps over the simulator, fanned out across a rayon pool.
//!
//! Each `(grid point, policy, seed)` run is independent and deterministic, so
//! rows are sorted by that key before writing and the output does not depend
//! on the worker count.

use std::collections::BTreeMap;
use std::io::Write;

use clap::ValueEnum;
use edgebatch_core::sim::{
    optimize_static_params, run_baseline_single_instance, run_baseline_static_batching, run_policy_sim,
    throughput_upper_bound, BoundVariant, Policy, Scenario, SimMetrics, StaticGrid, StaticParams, UniformRange,
};
use edgebatch_core::ComputeMode;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::CliError;

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "EDGEBATCH_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Lambda,
    Slot,
    MeanAccuracy,
    MeanLatency,
}

impl SweepAxis {
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Lambda => vec![10.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0, 200.0],
            SweepAxis::Slot => vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.8],
            SweepAxis::MeanAccuracy => vec![0.6, 0.625, 0.65, 0.675, 0.7, 0.725],
            SweepAxis::MeanLatency => vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.75],
        }
    }

    fn name(self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::Slot => "slot",
            SweepAxis::MeanAccuracy => "mean-accuracy",
            SweepAxis::MeanLatency => "mean-latency",
        }
    }
}

/// Policies and baselines a sweep can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum, Serialize)]
pub enum SweepPolicy {
    #[value(name = "full_optimal")]
    FullOptimal,
    #[value(name = "ee_suboptimal")]
    EeSuboptimal,
    #[value(name = "ee_optimal")]
    EeOptimal,
    #[value(name = "static_full")]
    StaticFull,
    #[value(name = "static_ee")]
    StaticEe,
    #[value(name = "single_full")]
    SingleFull,
    #[value(name = "single_ee")]
    SingleEe,
}

impl SweepPolicy {
    pub const PROPOSED: [SweepPolicy; 3] = [SweepPolicy::FullOptimal, SweepPolicy::EeSuboptimal, SweepPolicy::EeOptimal];

    pub fn name(self) -> &'static str {
        match self {
            SweepPolicy::FullOptimal => "full_optimal",
            SweepPolicy::EeSuboptimal => "ee_suboptimal",
            SweepPolicy::EeOptimal => "ee_optimal",
            SweepPolicy::StaticFull => "static_full",
            SweepPolicy::StaticEe => "static_ee",
            SweepPolicy::SingleFull => "single_full",
            SweepPolicy::SingleEe => "single_ee",
        }
    }

    fn static_mode(self) -> Option<ComputeMode> {
        match self {
            SweepPolicy::StaticFull => Some(ComputeMode::FullNetwork),
            SweepPolicy::StaticEe => Some(ComputeMode::EarlyExit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub policies: Vec<SweepPolicy>,
    pub seeds: Vec<u64>,
    /// Half width of the accuracy window on the mean-accuracy axis.
    pub accuracy_half_width: f64,
    /// Half width of the deadline window on the mean-latency axis.
    pub latency_half_width: f64,
}

impl SweepSpec {
    pub fn new(scenario: Scenario, axis: SweepAxis) -> Self {
        Self {
            values: axis.default_values(),
            policies: SweepPolicy::PROPOSED.to_vec(),
            seeds: (0..5).map(|i| scenario.seed + i).collect(),
            scenario,
            axis,
            accuracy_half_width: 0.05,
            latency_half_width: 0.25,
        }
    }
}

/// Scenario at one grid point.
pub fn point_scenario(spec: &SweepSpec, value: f64) -> Result<Scenario, CliError> {
    let mut s = spec.scenario.clone();
    match spec.axis {
        SweepAxis::Lambda => s.arrival_rate = value,
        SweepAxis::Slot => {
            s.config = s.config.with_slot_duration(value).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        SweepAxis::MeanAccuracy => {
            s.exit_dist.clear();
            s.accuracy_dist = Some(UniformRange::centered(value, spec.accuracy_half_width));
        }
        SweepAxis::MeanLatency => s.deadline_dist = UniformRange::centered(value, spec.latency_half_width),
    }
    s.validate().map_err(|e| CliError::Usage(format!("{} = {value}: {e}", spec.axis.name())))?;
    Ok(s)
}

/// One simulated run. Field order is the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scenario_id: String,
    pub policy: String,
    pub lambda: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub mean_acc: f64,
    pub mean_lat: f64,
    pub seed: u64,
    pub generated: u64,
    pub completed: u64,
    pub dropped: u64,
    pub completion_rate: f64,
    pub nodes_visited: u64,
}

/// Mean over seeds at one grid point, with the matching throughput bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub policy: String,
    pub axis: String,
    pub value: f64,
    pub seeds: usize,
    pub mean_completion_rate: f64,
    /// Half width of the 95% t-interval; 0 for a single seed.
    pub ci95: f64,
    /// Tasks per second.
    pub bound_asymptotic: f64,
    pub bound_slot_limited: f64,
    /// `min(1, bound / lambda)` for the slot-limited bound.
    pub rate_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
    /// Static-batching parameters used at each grid point.
    pub static_params: Vec<StaticChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticChoice {
    pub value: f64,
    pub policy: String,
    pub params: StaticParams,
}

/// Static-batching parameters for a grid point: the scenario's own, or the
/// grid-search optimum at 50 tasks/s.
pub fn static_params_for(scenario: &Scenario, mode: ComputeMode) -> StaticParams {
    scenario
        .static_batching
        .unwrap_or_else(|| optimize_static_params(scenario, &StaticGrid::standard(scenario), mode))
}

fn simulate(scenario: &Scenario, policy: SweepPolicy, statics: &BTreeMap<String, StaticParams>) -> SimMetrics {
    match policy {
        SweepPolicy::FullOptimal => run_policy_sim(scenario, Policy::FullOptimal),
        SweepPolicy::EeSuboptimal => run_policy_sim(scenario, Policy::EeSuboptimal),
        SweepPolicy::EeOptimal => run_policy_sim(scenario, Policy::EeOptimal),
        SweepPolicy::StaticFull | SweepPolicy::StaticEe => {
            let mode = policy.static_mode().expect("static policy");
            run_baseline_static_batching(scenario, statics[&static_key(scenario, mode)], mode)
        }
        SweepPolicy::SingleFull => run_baseline_single_instance(scenario, ComputeMode::FullNetwork),
        SweepPolicy::SingleEe => run_baseline_single_instance(scenario, ComputeMode::EarlyExit),
    }
}

/// Everything the static optimum depends on: the scenario at 50 tasks/s.
fn static_key(scenario: &Scenario, mode: ComputeMode) -> String {
    let normalized = Scenario { arrival_rate: 50.0, seed: 0, ..scenario.clone() };
    format!("{mode:?} {}", serde_json::to_string(&normalized).expect("scenario serializes"))
}

/// Rayon pool sized from [`WORKERS_ENV`], or rayon's default when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, CliError> {
    let pool = worker_pool()?;
    pool.install(|| run_sweep_in_current_pool(spec))
}

pub fn run_sweep_in_current_pool(spec: &SweepSpec) -> Result<SweepResult, CliError> {
    if spec.values.is_empty() || spec.policies.is_empty() || spec.seeds.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value, policy and seed".into()));
    }
    let points: Vec<Scenario> = spec.values.iter().map(|&v| point_scenario(spec, v)).collect::<Result<_, _>>()?;
    let mut static_jobs = Vec::new();
    for point in &points {
        for mode in spec.policies.iter().filter_map(|p| p.static_mode()) {
            static_jobs.push((static_key(point, mode), point, mode));
        }
    }
    static_jobs.sort_by(|a, b| a.0.cmp(&b.0));
    static_jobs.dedup_by(|a, b| a.0 == b.0);
    let statics: BTreeMap<String, StaticParams> =
        static_jobs.par_iter().map(|(k, point, mode)| (k.clone(), static_params_for(point, *mode))).collect();
    let mut static_params = Vec::new();
    for (point, &value) in points.iter().zip(&spec.values) {
        for &policy in &spec.policies {
            if let Some(mode) = policy.static_mode() {
                let params = statics[&static_key(point, mode)];
                static_params.push(StaticChoice { value, policy: policy.name().to_string(), params });
            }
        }
    }

    let mut jobs = Vec::new();
    for p in 0..points.len() {
        for &policy in &spec.policies {
            for &seed in &spec.seeds {
                jobs.push((p, policy, seed));
            }
        }
    }
    let mut runs: Vec<((usize, SweepPolicy, u64), SimMetrics)> = jobs
        .par_iter()
        .map(|&(p, policy, seed)| {
            let scenario = Scenario { seed, ..points[p].clone() };
            ((p, policy, seed), simulate(&scenario, policy, &statics))
        })
        .collect();
    runs.sort_by(|a, b| a.0.cmp(&b.0));

    let rows = runs
        .iter()
        .map(|&((p, policy, seed), ref m)| {
            let s = &points[p];
            SweepRow {
                scenario_id: s.id.clone(),
                policy: policy.name().to_string(),
                lambda: s.arrival_rate,
                t: s.config.slot_duration_s,
                mean_acc: s.mean_accuracy(),
                mean_lat: s.mean_latency(),
                seed,
                generated: m.generated,
                completed: m.completed,
                dropped: m.dropped,
                completion_rate: m.completion_rate,
                nodes_visited: m.search.nodes_visited,
            }
        })
        .collect();

    let mut summary = Vec::new();
    for (p, point) in points.iter().enumerate() {
        for &policy in &spec.policies {
            let rates: Vec<f64> = runs
                .iter()
                .filter(|((q, r, _), _)| *q == p && *r == policy)
                .map(|(_, m)| m.completion_rate)
                .collect();
            summary.push(summarize(spec, point, policy, spec.values[p], &rates));
        }
    }
    Ok(SweepResult { rows, summary, static_params })
}

fn summarize(spec: &SweepSpec, point: &Scenario, policy: SweepPolicy, value: f64, rates: &[f64]) -> SummaryRow {
    let (mean, ci95) = mean_ci95(rates);
    let slot = point.config.comp_slot_s;
    // Full-network bounds; early exits can only run faster.
    let profile = &point.profile;
    let slot_limited = throughput_upper_bound(profile, slot, BoundVariant::SlotLimited);
    SummaryRow {
        scenario_id: point.id.clone(),
        policy: policy.name().to_string(),
        axis: spec.axis.name().to_string(),
        value,
        seeds: rates.len(),
        mean_completion_rate: mean,
        ci95,
        bound_asymptotic: throughput_upper_bound(profile, slot, BoundVariant::Asymptotic),
        bound_slot_limited: slot_limited,
        rate_bound: (slot_limited / point.arrival_rate).min(1.0),
    }
}

/// Sample mean and the half width of its 95% Student-t interval.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive dof").inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Header-only CSV for an empty row set.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<(), CliError> {
    if rows.is_empty() {
        writeln!(
            out,
            "scenario_id,policy,lambda,T,mean_acc,mean_lat,seed,generated,completed,dropped,completion_rate,nodes_visited"
        )?;
        return Ok(());
    }
    write_rows(rows, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(axis: SweepAxis, values: Vec<f64>, seeds: usize) -> SweepSpec {
        SweepSpec {
            values,
            seeds: (0..seeds as u64).collect(),
            ..SweepSpec::new(Scenario::standard(50.0, 2.0, 0), axis)
        }
    }

    #[test]
    fn one_point_one_seed_gives_one_row_per_policy() {
        let r = run_sweep(&spec(SweepAxis::Lambda, vec![40.0], 1)).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.summary.len(), 3);
        assert!(r.summary.iter().all(|s| s.ci95 == 0.0));
    }

    #[test]
    fn grid_times_policies_times_seeds() {
        let r = run_sweep(&spec(SweepAxis::Lambda, vec![10.0, 50.0, 100.0], 5)).unwrap();
        assert_eq!(r.rows.len(), 45);
    }

    #[test]
    fn axes_change_the_right_field() {
        let base = spec(SweepAxis::Slot, vec![], 1);
        assert_eq!(point_scenario(&base, 0.4).unwrap().config.comm_slot_s, 0.4);
        let acc = SweepSpec { axis: SweepAxis::MeanAccuracy, ..base.clone() };
        assert!((point_scenario(&acc, 0.65).unwrap().mean_accuracy() - 0.65).abs() < 1e-12);
        let lat = SweepSpec { axis: SweepAxis::MeanLatency, ..base.clone() };
        assert_eq!(point_scenario(&lat, 1.0).unwrap().deadline_dist, UniformRange::new(0.75, 1.25));
        assert!(point_scenario(&lat, 0.1).is_err());
    }

    #[test]
    fn header_matches_the_documented_columns() {
        let r = run_sweep(&spec(SweepAxis::Lambda, vec![20.0], 1)).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&r.rows, &mut buf).unwrap();
        let mut empty = Vec::new();
        write_sweep_csv(&[], &mut empty).unwrap();
        let first = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        assert_eq!(first, String::from_utf8(empty).unwrap().trim_end());
    }

    #[test]
    fn t_interval_matches_tables() {
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        // t_{0.975, 2} = 4.3027
        assert!((h - 4.302_652_7 / 3f64.sqrt()).abs() < 1e-6);
    }
}

//! Domain types and the elementary per-task computations.
//!
//! Units are fixed throughout the crate: time in seconds, bandwidth in Hz,
//! payloads in bits. A "10 KB" feature vector is `80_000` bits.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub type TaskId = u64;

/// Radio and slot parameters shared by every task of an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::format::RawConfig", into = "crate::format::RawConfig")]
pub struct SystemConfig {
    pub total_bandwidth_hz: f64,
    pub noise_power: f64,
    pub slot_duration_s: f64,
    pub comm_slot_s: f64,
    pub comp_slot_s: f64,
    /// Absolute slack on `sum(rho) <= 1`.
    pub bandwidth_tolerance: f64,
    /// Absolute slack on every `compute_time <= budget` comparison.
    pub latency_tolerance_s: f64,
}

impl SystemConfig {
    pub const DEFAULT_BANDWIDTH_TOLERANCE: f64 = 1e-9;
    pub const DEFAULT_LATENCY_TOLERANCE_S: f64 = 1e-9;

    /// Equal communication and computation slots of `slot_duration_s`, unit noise power.
    pub fn new(total_bandwidth_hz: f64, slot_duration_s: f64) -> Result<Self, ModelError> {
        let config = Self {
            total_bandwidth_hz,
            noise_power: 1.0,
            slot_duration_s,
            comm_slot_s: slot_duration_s,
            comp_slot_s: slot_duration_s,
            bandwidth_tolerance: Self::DEFAULT_BANDWIDTH_TOLERANCE,
            latency_tolerance_s: Self::DEFAULT_LATENCY_TOLERANCE_S,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_slots(mut self, comm_slot_s: f64, comp_slot_s: f64) -> Result<Self, ModelError> {
        self.comm_slot_s = comm_slot_s;
        self.comp_slot_s = comp_slot_s;
        self.validate()?;
        Ok(self)
    }

    /// Sets all three slot lengths to `slot_s`.
    pub fn with_slot_duration(mut self, slot_s: f64) -> Result<Self, ModelError> {
        self.slot_duration_s = slot_s;
        self.comm_slot_s = slot_s;
        self.comp_slot_s = slot_s;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("total_bandwidth_hz", self.total_bandwidth_hz),
            ("noise_power", self.noise_power),
            ("slot_duration_s", self.slot_duration_s),
            ("comm_slot_s", self.comm_slot_s),
            ("comp_slot_s", self.comp_slot_s),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidField { field, reason: format!("must be positive, got {value}") });
            }
        }
        for (field, value) in [
            ("bandwidth_tolerance", self.bandwidth_tolerance),
            ("latency_tolerance_s", self.latency_tolerance_s),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::InvalidField { field, reason: format!("must be non-negative, got {value}") });
            }
        }
        Ok(())
    }

    /// The single bandwidth comparator used by every solver and oracle.
    #[inline]
    pub fn fits_bandwidth(&self, total_fraction: f64) -> bool {
        total_fraction <= 1.0 + self.bandwidth_tolerance
    }

    /// The single latency comparator used by every solver and oracle.
    #[inline]
    pub fn fits_latency(&self, compute_s: f64, budget_s: f64) -> bool {
        compute_s <= budget_s + self.latency_tolerance_s
    }
}

/// How a task's uplink quality is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinkQuality {
    /// Precomputed `p h^2 / N0`.
    Snr { snr: f64 },
    Channel { channel_gain: f64, tx_power: f64 },
}

impl LinkQuality {
    pub fn snr(&self, noise_power: f64) -> f64 {
        match *self {
            LinkQuality::Snr { snr } => snr,
            LinkQuality::Channel { channel_gain, tx_power } => tx_power * channel_gain * channel_gain / noise_power,
        }
    }
}

/// One inference request considered at an epoch boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRequest {
    pub id: TaskId,
    #[serde(flatten)]
    pub link: LinkQuality,
    pub feature_bits: u64,
    pub deadline_s: f64,
    #[serde(default)]
    pub waiting_s: f64,
    pub exit_point: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_req: Option<f64>,
}

impl TaskRequest {
    pub fn snr(&self, config: &SystemConfig) -> f64 {
        self.link.snr(config.noise_power)
    }
}

/// Execution time of one layer block (or the whole network) versus batch size.
///
/// `f(0) = 0` always. Tables list `f(1), f(2), ...`; batch sizes beyond the
/// table are unsupported and report an infinite time.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchTime {
    Linear { c0: f64, c1: f64 },
    Table(Vec<f64>),
}

impl BatchTime {
    #[inline]
    pub fn eval(&self, batch: usize) -> f64 {
        if batch == 0 {
            return 0.0;
        }
        match self {
            BatchTime::Linear { c0, c1 } => c0 + c1 * batch as f64,
            BatchTime::Table(times) => times.get(batch - 1).copied().unwrap_or(f64::INFINITY),
        }
    }

    fn validate(&self, field: &'static str) -> Result<(), ModelError> {
        match self {
            BatchTime::Linear { c0, c1 } => {
                if !(c0.is_finite() && c1.is_finite() && *c0 >= 0.0 && *c1 >= 0.0) {
                    return Err(ModelError::InvalidField {
                        field,
                        reason: format!("linear coefficients must be finite and non-negative, got c0={c0}, c1={c1}"),
                    });
                }
            }
            BatchTime::Table(times) => {
                let mut prev = 0.0;
                for (i, &t) in times.iter().enumerate() {
                    if !(t.is_finite() && t >= prev) {
                        return Err(ModelError::InvalidField {
                            field,
                            reason: format!("table must be non-negative and non-decreasing, entry for n={} is {t}", i + 1),
                        });
                    }
                    prev = t;
                }
            }
        }
        Ok(())
    }
}

/// Block-wise batch execution times and the accuracy reached at each exit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::format::RawProfile", into = "crate::format::RawProfile")]
pub struct LatencyProfile {
    blocks: Vec<BatchTime>,
    full: Option<BatchTime>,
    accuracy_per_exit: Vec<f64>,
}

impl LatencyProfile {
    /// Full-network accuracy of the reference classifier.
    pub const FULL_NETWORK_ACCURACY: f64 = 0.749;

    pub fn new(blocks: Vec<BatchTime>, accuracy_per_exit: Vec<f64>) -> Result<Self, ModelError> {
        Self::with_full_time(blocks, None, accuracy_per_exit)
    }

    /// `full` overrides the default whole-network time `f(n) = sum_d f_d(n)`.
    pub fn with_full_time(
        blocks: Vec<BatchTime>,
        full: Option<BatchTime>,
        accuracy_per_exit: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if blocks.is_empty() {
            return Err(ModelError::InvalidField { field: "profile", reason: "at least one block is required".into() });
        }
        for block in &blocks {
            block.validate("profile.blocks")?;
        }
        if let Some(full) = &full {
            full.validate("profile.full")?;
        }
        if accuracy_per_exit.len() != blocks.len() {
            return Err(ModelError::InvalidField {
                field: "profile.accuracy_per_exit",
                reason: format!("expected {} entries, got {}", blocks.len(), accuracy_per_exit.len()),
            });
        }
        if accuracy_per_exit.iter().any(|a| !(a.is_finite() && *a > 0.0 && *a <= 1.0))
            || accuracy_per_exit.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(ModelError::InvalidField {
                field: "profile.accuracy_per_exit",
                reason: "must lie in (0, 1] and be strictly increasing".into(),
            });
        }
        Ok(Self { blocks, full, accuracy_per_exit })
    }

    /// Linear per-block profile; `accuracy_per_exit` defaults when `None`.
    pub fn linear(c0: &[f64], c1: &[f64], accuracy_per_exit: Option<Vec<f64>>) -> Result<Self, ModelError> {
        if c0.len() != c1.len() {
            return Err(ModelError::InvalidField {
                field: "profile.linear",
                reason: format!("c0 has {} entries but c1 has {}", c0.len(), c1.len()),
            });
        }
        let blocks: Vec<_> = c0.iter().zip(c1).map(|(&c0, &c1)| BatchTime::Linear { c0, c1 }).collect();
        let accuracy = accuracy_per_exit.unwrap_or_else(|| default_accuracy(blocks.len()));
        Self::new(blocks, accuracy)
    }

    /// Synthetic three-block profile used by all shipped scenarios.
    ///
    /// `f(1) = 50 ms` and `f(20) = 249.5 ms`, so a 250 ms slot fits 20
    /// full-depth tasks. Most of the per-task slope sits in the first block.
    pub fn synthetic_default() -> Self {
        Self::linear(&SYNTHETIC_C0, &SYNTHETIC_C1, Some(vec![0.60, 0.70, Self::FULL_NETWORK_ACCURACY]))
            .expect("static profile is valid")
    }

    /// The synthetic profile's totals spread over `depth` blocks, keeping `f`
    /// unchanged. Used for benchmarks at depths other than three.
    pub fn synthetic_with_depth(depth: usize) -> Result<Self, ModelError> {
        if depth == 0 {
            return Err(ModelError::InvalidField { field: "depth", reason: "must be at least 1".into() });
        }
        let c0_total: f64 = SYNTHETIC_C0.iter().sum();
        let c1_total: f64 = SYNTHETIC_C1.iter().sum();
        let c0 = vec![c0_total / depth as f64; depth];
        let c1 = vec![c1_total / depth as f64; depth];
        Self::linear(&c0, &c1, None)
    }

    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[BatchTime] {
        &self.blocks
    }

    pub fn full_override(&self) -> Option<&BatchTime> {
        self.full.as_ref()
    }

    pub fn accuracy_per_exit(&self) -> &[f64] {
        &self.accuracy_per_exit
    }

    /// `f_d(n)` for 1-based block `d`.
    #[inline]
    pub fn block_time(&self, block: usize, batch: usize) -> f64 {
        self.blocks[block - 1].eval(batch)
    }

    /// Whole-network batch time `f(n)`.
    pub fn full_time(&self, batch: usize) -> f64 {
        match &self.full {
            Some(full) => full.eval(batch),
            None => self.tightened_time(self.depth(), batch),
        }
    }

    /// `sum_{d <= exit} f_d(n)`: every block runs at the same batch size.
    pub fn tightened_time(&self, exit: usize, batch: usize) -> f64 {
        let mut elapsed = 0.0;
        for d in 1..=exit {
            elapsed += self.block_time(d, batch);
        }
        elapsed
    }

    /// `sum_{d <= exit} f_d(n_d)` for block-wise batch sizes `n_d`.
    pub fn exit_time(&self, exit: usize, block_batches: &[usize]) -> f64 {
        let mut elapsed = 0.0;
        for d in 1..=exit {
            elapsed += self.block_time(d, block_batches[d - 1]);
        }
        elapsed
    }

    /// Largest `n` whose whole-network time fits in `slot_s`, capped at `cap`.
    pub fn max_batch_within(&self, slot_s: f64, tolerance_s: f64, cap: usize) -> usize {
        (1..=cap).take_while(|&n| self.full_time(n) <= slot_s + tolerance_s).last().unwrap_or(0)
    }
}

const SYNTHETIC_C0: [f64; 3] = [0.0150, 0.0125, 0.0120];
const SYNTHETIC_C1: [f64; 3] = [0.0065, 0.0025, 0.0015];

/// Placeholder accuracy ladder ending at the full-network accuracy.
pub fn default_accuracy(depth: usize) -> Vec<f64> {
    match depth {
        1 => vec![LatencyProfile::FULL_NETWORK_ACCURACY],
        3 => vec![0.60, 0.70, LatencyProfile::FULL_NETWORK_ACCURACY],
        _ => {
            let lo = 0.60;
            let step = (LatencyProfile::FULL_NETWORK_ACCURACY - lo) / (depth - 1) as f64;
            (0..depth).map(|i| lo + step * i as f64).collect()
        }
    }
}

/// Minimum bandwidth fraction `l / (T_comm * B * log2(1 + snr))`. May exceed 1.
pub fn min_bandwidth_fraction(task: &TaskRequest, config: &SystemConfig) -> Result<f64, ModelError> {
    let snr = task.snr(config);
    if !(snr.is_finite() && snr > 0.0) {
        return Err(ModelError::NonPositiveSnr { id: task.id, snr });
    }
    if !(config.total_bandwidth_hz > 0.0 && config.comm_slot_s > 0.0) {
        return Err(ModelError::InvalidField {
            field: "total_bandwidth_hz",
            reason: "bandwidth and communication slot must be positive".into(),
        });
    }
    if task.feature_bits == 0 {
        return Err(ModelError::InvalidField { field: "feature_bits", reason: format!("task {} carries no payload", task.id) });
    }
    Ok(task.feature_bits as f64 / (config.comm_slot_s * config.total_bandwidth_hz * (1.0 + snr).log2()))
}

/// Compute time the task can tolerate this epoch: `min(tau - t_wt - T_comm, T_comp)`.
/// Non-positive values mean the task cannot be served.
pub fn latency_budget(task: &TaskRequest, config: &SystemConfig) -> f64 {
    (task.deadline_s - task.waiting_s - config.comm_slot_s).min(config.comp_slot_s)
}

/// `n_d = #{k : d_k >= d}` for `d = 1..=depth`.
pub fn block_batch_sizes(exit_points: &[usize], depth: usize) -> Result<Vec<usize>, ModelError> {
    let mut per_exit = vec![0usize; depth];
    for &exit in exit_points {
        if exit == 0 || exit > depth {
            return Err(ModelError::ExitOutOfRange { exit, depth });
        }
        per_exit[exit - 1] += 1;
    }
    let mut sizes = vec![0usize; depth];
    let mut running = 0;
    for d in (0..depth).rev() {
        running += per_exit[d];
        sizes[d] = running;
    }
    Ok(sizes)
}

/// Smallest exit whose accuracy meets `accuracy`.
pub fn exit_point_for_accuracy(accuracy: f64, profile: &LatencyProfile) -> Result<usize, ModelError> {
    if !(accuracy > 0.0 && accuracy < 1.0) {
        return Err(ModelError::InvalidField { field: "accuracy_req", reason: format!("must lie in (0, 1), got {accuracy}") });
    }
    profile
        .accuracy_per_exit()
        .iter()
        .position(|&a| a >= accuracy)
        .map(|i| i + 1)
        .ok_or(ModelError::UnattainableAccuracy {
            requested: accuracy,
            best: *profile.accuracy_per_exit().last().expect("non-empty profile"),
        })
}

/// One epoch's scheduling problem with the derived per-task quantities.
#[derive(Debug, Clone)]
pub struct Instance {
    config: SystemConfig,
    profile: LatencyProfile,
    tasks: Vec<TaskRequest>,
    rho_min: Vec<f64>,
    budget: Vec<f64>,
    index: HashMap<TaskId, usize>,
    bandwidth_limited: bool,
}

impl Instance {
    pub fn new(config: SystemConfig, profile: LatencyProfile, tasks: Vec<TaskRequest>) -> Result<Self, ModelError> {
        config.validate()?;
        let depth = profile.depth();
        let mut index = HashMap::with_capacity(tasks.len());
        let mut rho_min = Vec::with_capacity(tasks.len());
        let mut budget = Vec::with_capacity(tasks.len());
        for (i, task) in tasks.iter().enumerate() {
            if index.insert(task.id, i).is_some() {
                return Err(ModelError::DuplicateTask(task.id));
            }
            if task.exit_point == 0 || task.exit_point > depth {
                return Err(ModelError::ExitOutOfRange { exit: task.exit_point, depth });
            }
            if !(task.deadline_s.is_finite() && task.deadline_s > 0.0) {
                return Err(ModelError::InvalidField {
                    field: "deadline_s",
                    reason: format!("task {} has deadline {}", task.id, task.deadline_s),
                });
            }
            if !(task.waiting_s.is_finite() && task.waiting_s >= 0.0) {
                return Err(ModelError::InvalidField {
                    field: "waiting_s",
                    reason: format!("task {} has waiting time {}", task.id, task.waiting_s),
                });
            }
            rho_min.push(min_bandwidth_fraction(task, &config)?);
            budget.push(latency_budget(task, &config));
        }
        Ok(Self { config, profile, tasks, rho_min, budget, index, bandwidth_limited: true })
    }

    /// The same instance with the bandwidth constraint switched off.
    pub fn without_bandwidth_limit(mut self) -> Self {
        self.bandwidth_limited = false;
        self
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn profile(&self) -> &LatencyProfile {
        &self.profile
    }

    pub fn depth(&self) -> usize {
        self.profile.depth()
    }

    pub fn tasks(&self) -> &[TaskRequest] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, i: usize) -> &TaskRequest {
        &self.tasks[i]
    }

    pub fn rho_min(&self, i: usize) -> f64 {
        self.rho_min[i]
    }

    pub fn latency_budget(&self, i: usize) -> f64 {
        self.budget[i]
    }

    pub fn exit_point(&self, i: usize) -> usize {
        self.tasks[i].exit_point
    }

    pub fn position(&self, id: TaskId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn bandwidth_limited(&self) -> bool {
        self.bandwidth_limited
    }

    pub fn fits_bandwidth(&self, total_fraction: f64) -> bool {
        !self.bandwidth_limited || self.config.fits_bandwidth(total_fraction)
    }

    pub fn fits_latency(&self, compute_s: f64, budget_s: f64) -> bool {
        self.config.fits_latency(compute_s, budget_s)
    }

    /// Task positions sorted by ascending `rho_min`, ties by ascending id.
    pub fn bandwidth_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.tasks.len()).collect();
        order.sort_by(|&a, &b| {
            self.rho_min[a].total_cmp(&self.rho_min[b]).then(self.tasks[a].id.cmp(&self.tasks[b].id))
        });
        order
    }
}

/// Whether batch computation stops at each task's exit or runs the whole network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComputeMode {
    FullNetwork,
    EarlyExit,
}

/// A scheduled subset with its bandwidth allocation and predicted compute times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub mode: ComputeMode,
    /// Ascending ids.
    pub selected_ids: Vec<TaskId>,
    /// `per_depth[m - 1]` holds the selected tasks exiting after block `m`.
    pub per_depth: Vec<Vec<TaskId>>,
    pub bandwidth_fractions: BTreeMap<TaskId, f64>,
    pub block_batch_sizes: Vec<usize>,
    pub predicted_compute_s: BTreeMap<TaskId, f64>,
}

impl Selection {
    pub fn empty(instance: &Instance, mode: ComputeMode) -> Self {
        Self::from_positions(instance, &[], mode)
    }

    /// Builds the selection for the given task positions; each task gets exactly `rho_min`.
    pub fn from_positions(instance: &Instance, positions: &[usize], mode: ComputeMode) -> Self {
        let depth = instance.depth();
        let mut positions = positions.to_vec();
        positions.sort_by_key(|&i| instance.task(i).id);
        let exits: Vec<usize> = positions.iter().map(|&i| instance.exit_point(i)).collect();
        let block_batch_sizes = match mode {
            ComputeMode::FullNetwork => vec![positions.len(); depth],
            ComputeMode::EarlyExit => block_batch_sizes(&exits, depth).expect("validated exit points"),
        };
        let mut per_depth = vec![Vec::new(); depth];
        let mut bandwidth_fractions = BTreeMap::new();
        let mut predicted_compute_s = BTreeMap::new();
        let full_time = instance.profile().full_time(positions.len());
        for &i in &positions {
            let task = instance.task(i);
            per_depth[task.exit_point - 1].push(task.id);
            bandwidth_fractions.insert(task.id, instance.rho_min(i));
            let t = match mode {
                ComputeMode::FullNetwork => full_time,
                ComputeMode::EarlyExit => instance.profile().exit_time(task.exit_point, &block_batch_sizes),
            };
            predicted_compute_s.insert(task.id, t);
        }
        Self {
            mode,
            selected_ids: positions.iter().map(|&i| instance.task(i).id).collect(),
            per_depth,
            bandwidth_fractions,
            block_batch_sizes,
            predicted_compute_s,
        }
    }

    pub fn len(&self) -> usize {
        self.selected_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected_ids.is_empty()
    }

    pub fn total_bandwidth(&self) -> f64 {
        self.bandwidth_fractions.values().sum()
    }

    pub fn per_depth_counts(&self) -> Vec<usize> {
        self.per_depth.iter().map(Vec::len).collect()
    }
}

/// Checks a selection against the scheduling constraints straight from their
/// definitions. Shares no code with the solvers beyond the profile lookups.
pub fn check_feasible(selection: &Selection, instance: &Instance, early_exit: bool) -> Result<bool, ModelError> {
    let positions = selection
        .selected_ids
        .iter()
        .map(|&id| instance.position(id).ok_or(ModelError::UnknownTask(id)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(positions_feasible(instance, &positions, early_exit))
}

/// [`check_feasible`] on task positions.
pub fn positions_feasible(instance: &Instance, positions: &[usize], early_exit: bool) -> bool {
    let total: f64 = positions.iter().map(|&i| instance.rho_min(i)).sum();
    if !instance.fits_bandwidth(total) {
        return false;
    }
    if early_exit {
        let depth = instance.depth();
        let mut n = vec![0usize; depth];
        for &i in positions {
            for count in n.iter_mut().take(instance.exit_point(i)) {
                *count += 1;
            }
        }
        positions.iter().all(|&i| {
            let t = instance.profile().exit_time(instance.exit_point(i), &n);
            instance.fits_latency(t, instance.latency_budget(i))
        })
    } else {
        let t = instance.profile().full_time(positions.len());
        positions.iter().all(|&i| instance.fits_latency(t, instance.latency_budget(i)))
    }
}

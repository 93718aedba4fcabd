use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::model::{block_batch_sizes, ComputeMode, TaskRequest};
use crate::sim::scenario::{Scenario, StaticParams};
use crate::sim::workload::{generate_workload, Arrival};
use crate::sim::{min_compute_time, LatencyRecord, SimMetrics};

/// Upload time with the whole band.
fn upload_time(task: &TaskRequest, scenario: &Scenario) -> f64 {
    let snr = task.snr(&scenario.config);
    task.feature_bits as f64 / (scenario.config.total_bandwidth_hz * (1.0 + snr).log2())
}

fn exit_of(arrival: &Arrival, scenario: &Scenario, mode: ComputeMode) -> usize {
    match mode {
        ComputeMode::FullNetwork => scenario.profile.depth(),
        ComputeMode::EarlyExit => arrival.task.exit_point,
    }
}

fn complete(metrics: &mut SimMetrics, arrival: &Arrival, finish_s: f64, exit_point: usize, tol: f64) {
    let latency_s = finish_s - arrival.arrival_s;
    if latency_s <= arrival.task.deadline_s + tol {
        metrics.completed += 1;
        metrics.latencies.push(LatencyRecord { id: arrival.task.id, arrival_s: arrival.arrival_s, latency_s, exit_point });
    } else {
        metrics.dropped += 1;
    }
}

/// FIFO server handling one task at a time: full-band upload, then a batch
/// of one. A task is dropped when popped if it can no longer finish in time.
pub fn run_baseline_single_instance(scenario: &Scenario, mode: ComputeMode) -> SimMetrics {
    serve_fifo(&generate_workload(scenario), scenario, mode)
}

fn serve_fifo(arrivals: &[Arrival], scenario: &Scenario, mode: ComputeMode) -> SimMetrics {
    let tol = scenario.config.latency_tolerance_s;
    let mut metrics = SimMetrics::default();
    let mut free_at = 0.0f64;
    for arrival in arrivals {
        let start = free_at.max(arrival.arrival_s);
        let service = upload_time(&arrival.task, scenario) + min_compute_time(&scenario.profile, &arrival.task, mode);
        if start + service - arrival.arrival_s > arrival.task.deadline_s + tol {
            metrics.dropped += 1;
            continue;
        }
        free_at = start + service;
        complete(&mut metrics, arrival, free_at, exit_of(arrival, scenario, mode), tol);
    }
    metrics.finish(arrivals.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Arrival(usize),
    UploadDone(usize),
    GpuFree,
    Timeout,
}

#[derive(Debug)]
struct Scheduled {
    at: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that `BinaryHeap` pops the earliest event, FIFO among ties.
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.total_cmp(&self.at).then(other.seq.cmp(&self.seq))
    }
}

struct StaticSim<'a> {
    scenario: &'a Scenario,
    arrivals: &'a [Arrival],
    params: StaticParams,
    mode: ComputeMode,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    uploads: VecDeque<usize>,
    uplink_busy: bool,
    /// `(task, time it entered the buffer)`.
    buffer: VecDeque<(usize, f64)>,
    gpu_busy: bool,
    metrics: SimMetrics,
}

impl StaticSim<'_> {
    fn schedule(&mut self, at: f64, event: Event) {
        self.seq += 1;
        self.queue.push(Scheduled { at, seq: self.seq, event });
    }

    fn min_compute(&self, i: usize) -> f64 {
        min_compute_time(&self.scenario.profile, &self.arrivals[i].task, self.mode)
    }

    fn expired(&self, i: usize, now: f64, extra: f64) -> bool {
        let a = &self.arrivals[i];
        now + extra - a.arrival_s > a.task.deadline_s + self.scenario.config.latency_tolerance_s
    }

    fn start_upload(&mut self, now: f64) {
        if self.uplink_busy {
            return;
        }
        while let Some(i) = self.uploads.pop_front() {
            let upload = upload_time(&self.arrivals[i].task, self.scenario);
            if self.expired(i, now, upload + self.min_compute(i)) {
                self.metrics.dropped += 1;
                continue;
            }
            self.uplink_busy = true;
            self.schedule(now + upload, Event::UploadDone(i));
            return;
        }
    }

    fn try_launch(&mut self, now: f64) {
        if self.gpu_busy {
            return;
        }
        let before = self.buffer.front().map(|&(i, _)| i);
        let mut kept = VecDeque::with_capacity(self.buffer.len());
        while let Some((i, t)) = self.buffer.pop_front() {
            if self.expired(i, now, self.min_compute(i)) {
                self.metrics.dropped += 1;
            } else {
                kept.push_back((i, t));
            }
        }
        self.buffer = kept;
        let Some(&(front, oldest)) = self.buffer.front() else { return };
        let timeout = self.params.timeout_s;
        if self.buffer.len() < self.params.batch_size && now < oldest + timeout {
            if before != Some(front) {
                self.schedule(oldest + timeout, Event::Timeout);
            }
            return;
        }
        let take = self.params.batch_size.min(self.buffer.len());
        let batch: Vec<usize> = self.buffer.drain(..take).map(|(i, _)| i).collect();
        let profile = &self.scenario.profile;
        let exits: Vec<usize> = batch.iter().map(|&i| exit_of(&self.arrivals[i], self.scenario, self.mode)).collect();
        let sizes = block_batch_sizes(&exits, profile.depth()).expect("exits within depth");
        let tol = self.scenario.config.latency_tolerance_s;
        let mut busy_until = now;
        for (&i, &exit) in batch.iter().zip(&exits) {
            let finish = now + profile.exit_time(exit, &sizes);
            busy_until = busy_until.max(finish);
            complete(&mut self.metrics, &self.arrivals[i], finish, exit, tol);
        }
        self.gpu_busy = true;
        self.schedule(busy_until, Event::GpuFree);
        if let Some(&(_, t)) = self.buffer.front() {
            self.schedule((t + timeout).max(busy_until), Event::Timeout);
        }
    }

    fn run(mut self) -> SimMetrics {
        for i in 0..self.arrivals.len() {
            self.schedule(self.arrivals[i].arrival_s, Event::Arrival(i));
        }
        while let Some(Scheduled { at, event, .. }) = self.queue.pop() {
            match event {
                Event::Arrival(i) => {
                    self.uploads.push_back(i);
                    self.start_upload(at);
                }
                Event::UploadDone(i) => {
                    self.uplink_busy = false;
                    let first = self.buffer.is_empty();
                    self.buffer.push_back((i, at));
                    if first {
                        self.schedule(at + self.params.timeout_s, Event::Timeout);
                    }
                    self.try_launch(at);
                    self.start_upload(at);
                }
                Event::GpuFree => {
                    self.gpu_busy = false;
                    self.try_launch(at);
                }
                Event::Timeout => self.try_launch(at),
            }
        }
        // Anything left in the buffer could not be launched before expiring.
        self.metrics.dropped += self.buffer.len() as u64;
        self.metrics
    }
}

/// Fixed batch size and timeout. Uploads are FIFO with the whole band; a
/// batch launches when the buffer holds `batch_size` tasks or its oldest
/// task has waited `timeout_s`, whichever is first, and the GPU is idle.
/// Tasks that cannot finish in time are purged before each launch.
pub fn run_baseline_static_batching(scenario: &Scenario, params: StaticParams, mode: ComputeMode) -> SimMetrics {
    let arrivals = generate_workload(scenario);
    let sim = StaticSim {
        scenario,
        arrivals: &arrivals,
        params,
        mode,
        queue: BinaryHeap::new(),
        seq: 0,
        uploads: VecDeque::new(),
        uplink_busy: false,
        buffer: VecDeque::new(),
        gpu_busy: false,
        metrics: SimMetrics::default(),
    };
    sim.run().finish(arrivals.len())
}

/// Search space and load point for [`optimize_static_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct StaticGrid {
    pub batch_sizes: Vec<usize>,
    pub timeouts_s: Vec<f64>,
    pub seeds: Vec<u64>,
    pub arrival_rate: f64,
}

impl StaticGrid {
    /// Batch sizes `1..=n_max` for the scenario's slot, a fixed timeout
    /// ladder, three seeds, 50 tasks/s.
    pub fn standard(scenario: &Scenario) -> Self {
        let config = &scenario.config;
        let n_max = scenario.profile.max_batch_within(config.comp_slot_s, config.latency_tolerance_s, 1024).max(1);
        Self {
            batch_sizes: (1..=n_max).collect(),
            timeouts_s: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5],
            seeds: vec![1, 2, 3],
            arrival_rate: 50.0,
        }
    }
}

/// Grid point with the best mean completion rate. Ties go to the smaller
/// batch, then the smaller timeout.
pub fn optimize_static_params(scenario: &Scenario, grid: &StaticGrid, mode: ComputeMode) -> StaticParams {
    let mut best: Option<(f64, StaticParams)> = None;
    for &batch_size in &grid.batch_sizes {
        for &timeout_s in &grid.timeouts_s {
            let params = StaticParams { batch_size, timeout_s };
            let (completed, generated) = grid.seeds.iter().fold((0u64, 0u64), |(c, g), &seed| {
                let s = Scenario { seed, arrival_rate: grid.arrival_rate, ..scenario.clone() };
                let m = run_baseline_static_batching(&s, params, mode);
                (c + m.completed, g + m.generated)
            });
            let rate = if generated == 0 { 0.0 } else { completed as f64 / generated as f64 };
            let better = match best {
                None => true,
                Some((r, b)) => {
                    rate > r
                        || (rate == r
                            && (batch_size, timeout_s).partial_cmp(&(b.batch_size, b.timeout_s)) == Some(Ordering::Less))
                }
            };
            if better {
                best = Some((rate, params));
            }
        }
    }
    best.map(|(_, p)| p).expect("grid has at least one point")
}

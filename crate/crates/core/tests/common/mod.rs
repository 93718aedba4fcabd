#![allow(dead_code)]

use edgebatch_core::{Instance, LatencyProfile, LinkQuality, SystemConfig, TaskRequest};
use proptest::prelude::*;

/// `(exit, budget step, rho step)`; budgets are multiples of 20 ms and
/// bandwidth fractions multiples of 0.05 so ties and boundaries are common.
pub type TaskSpec = (usize, u32, u32);

/// `T = 0.5`, unit SNR, and a deadline of `budget + T` so the budget is exact.
pub fn build(c0: &[f64], c1: &[f64], tasks: &[TaskSpec]) -> Instance {
    let config = SystemConfig::new(1e6, 0.5).unwrap();
    let profile = LatencyProfile::linear(c0, c1, None).unwrap();
    let tasks = tasks
        .iter()
        .enumerate()
        .map(|(i, &(exit, b, r))| TaskRequest {
            id: i as u64 + 1,
            link: LinkQuality::Snr { snr: 1.0 },
            feature_bits: 25_000 * r as u64,
            deadline_s: 0.02 * b as f64 + 0.5,
            waiting_s: 0.0,
            exit_point: exit,
            accuracy_req: None,
        })
        .collect();
    Instance::new(config, profile, tasks).unwrap()
}

pub fn instances(max_k: usize, depths: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Instance> {
    depths.prop_flat_map(move |d| {
        (
            prop::collection::vec(0u32..=3, d),
            prop::collection::vec(1u32..=5, d),
            prop::collection::vec((1..=d, 1u32..=25, 1u32..=12), 0..=max_k),
        )
            .prop_map(|(a, c, tasks)| {
                let c0: Vec<f64> = a.iter().map(|&x| 0.01 * x as f64).collect();
                let c1: Vec<f64> = c.iter().map(|&x| 0.01 * x as f64).collect();
                build(&c0, &c1, &tasks)
            })
    })
}

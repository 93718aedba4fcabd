use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;

use crate::model::{exit_point_for_accuracy, Instance, LinkQuality, TaskRequest};
use crate::sim::scenario::Scenario;

const ARRIVAL_STREAM: u64 = 1;
const MARK_STREAM: u64 = 2;
const INSTANCE_STREAM: u64 = 3;

/// A generated request with its absolute arrival time. `task.waiting_s` is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub arrival_s: f64,
    pub task: TaskRequest,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, stream, index)`.
pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)));
    rng.set_stream(stream);
    rng
}

/// Poisson arrivals over `[0, duration)` with i.i.d. marks.
///
/// Arrival times and per-task marks come from separate streams, so task `i`
/// keeps its channel, deadline and exit when only the rate changes.
pub fn generate_workload(scenario: &Scenario) -> Vec<Arrival> {
    let mut clock = stream_rng(scenario.seed, ARRIVAL_STREAM, 0);
    let gaps = Exp::new(scenario.arrival_rate).expect("positive arrival rate");
    let marks = Marks::new(scenario);
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += gaps.sample(&mut clock);
        if t >= scenario.duration_s {
            break;
        }
        let index = out.len() as u64;
        let task = marks.draw(&mut stream_rng(scenario.seed, MARK_STREAM, index), index);
        out.push(Arrival { arrival_s: t, task });
    }
    out
}

/// One epoch's worth of `tasks` fresh requests: marks as in
/// [`generate_workload`], waiting times uniform over one communication slot.
/// `index` selects an independent draw.
pub fn sample_instance(scenario: &Scenario, tasks: usize, index: u64) -> Instance {
    let marks = Marks::new(scenario);
    let mut rng = stream_rng(scenario.seed, INSTANCE_STREAM, index);
    let slot = scenario.config.comm_slot_s;
    let tasks = (0..tasks as u64)
        .map(|id| {
            let mut task = marks.draw(&mut rng, id);
            task.waiting_s = rng.random_range(0.0..slot);
            task
        })
        .collect();
    Instance::new(scenario.config, scenario.profile.clone(), tasks).expect("sampled tasks are valid")
}

struct Marks<'a> {
    scenario: &'a Scenario,
    fading: Exp<f64>,
    snr_scale: f64,
    weights: Option<WeightedIndex<f64>>,
}

impl<'a> Marks<'a> {
    fn new(scenario: &'a Scenario) -> Self {
        Self {
            scenario,
            fading: Exp::new(1.0 / scenario.avg_path_loss).expect("positive path loss"),
            snr_scale: 10f64.powf(scenario.snr_db / 10.0) / scenario.avg_path_loss,
            weights: (!scenario.exit_dist.is_empty())
                .then(|| WeightedIndex::new(&scenario.exit_dist).expect("validated weights")),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, id: u64) -> TaskRequest {
        let s = self.scenario;
        let depth = s.profile.depth();
        let gain_sq: f64 = self.fading.sample(rng);
        let deadline_s = uniform(rng, s.deadline_dist.lo, s.deadline_dist.hi);
        let (exit_point, accuracy_req) = match (&s.accuracy_dist, &self.weights) {
            (Some(r), _) => {
                let a = uniform(rng, r.lo, r.hi);
                (exit_point_for_accuracy(a, &s.profile).unwrap_or(depth), Some(a))
            }
            (None, Some(w)) => (w.sample(rng) + 1, None),
            (None, None) => (rng.random_range(1..=depth), None),
        };
        TaskRequest {
            id,
            link: LinkQuality::Snr { snr: self.snr_scale * gain_sq },
            feature_bits: s.feature_bits,
            deadline_s,
            waiting_s: 0.0,
            exit_point,
            accuracy_req,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::UniformRange;

    #[test]
    fn repeatable_for_a_seed() {
        let s = Scenario::standard(50.0, 5.0, 7);
        assert_eq!(generate_workload(&s), generate_workload(&s));
        let other = Scenario { seed: 8, ..s.clone() };
        assert_ne!(generate_workload(&s), generate_workload(&other));
    }

    #[test]
    fn marks_do_not_depend_on_rate() {
        let a = generate_workload(&Scenario::standard(20.0, 5.0, 3));
        let b = generate_workload(&Scenario::standard(80.0, 5.0, 3));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.task, y.task);
        }
    }

    #[test]
    fn sparse_rate_yields_nothing() {
        assert!(generate_workload(&Scenario::standard(0.001, 1.0, 1)).len() <= 1);
    }

    #[test]
    fn marks_respect_their_distributions() {
        let s = Scenario::standard(200.0, 20.0, 11);
        let w = generate_workload(&s);
        assert!(w.windows(2).all(|p| p[0].arrival_s < p[1].arrival_s));
        assert!(w.iter().all(|a| (0.5..2.0).contains(&a.task.deadline_s)));
        let mut per_exit = [0usize; 3];
        for a in &w {
            per_exit[a.task.exit_point - 1] += 1;
        }
        let n = w.len() as f64;
        for c in per_exit {
            assert!((c as f64 / n - 1.0 / 3.0).abs() < 0.03, "{per_exit:?}");
        }
        // E[snr] = 100 under unit-mean exponential fading.
        let mean_snr: f64 = w.iter().map(|a| a.task.link.snr(1.0)).sum::<f64>() / n;
        assert!((mean_snr - 100.0).abs() < 6.0, "{mean_snr}");
    }

    #[test]
    fn sampled_instances_wait_less_than_a_slot() {
        let s = Scenario::standard(1.0, 1.0, 5);
        let inst = sample_instance(&s, 32, 0);
        assert_eq!(inst.len(), 32);
        assert!(inst.tasks().iter().all(|t| (0.0..0.25).contains(&t.waiting_s)));
        assert_ne!(inst.tasks(), sample_instance(&s, 32, 1).tasks());
        assert_eq!(inst.tasks(), sample_instance(&s, 32, 0).tasks());
    }

    #[test]
    fn accuracy_requirements_map_to_exits() {
        let mut s = Scenario::standard(100.0, 5.0, 2);
        s.accuracy_dist = Some(UniformRange::new(0.65, 0.80));
        for a in generate_workload(&s) {
            let req = a.task.accuracy_req.unwrap();
            let expect = if req <= 0.70 { 2 } else { 3 };
            assert_eq!(a.task.exit_point, expect, "{req}");
        }
    }
}

use serde::Serialize;

use crate::model::{BatchTime, LatencyProfile, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// `lim n / f(n)`: unbounded batches.
    Asymptotic,
    /// `n_max / T` with `n_max` the largest batch finishing within `T`.
    SlotLimited,
}

/// Largest batch considered when a profile never outgrows the slot.
const BATCH_CAP: usize = 1 << 20;

/// Compute throughput ceiling in tasks per second.
pub fn throughput_upper_bound(profile: &LatencyProfile, slot_s: f64, variant: BoundVariant) -> f64 {
    match variant {
        BoundVariant::Asymptotic => {
            let slope = match profile.full_override() {
                Some(full) => linear_slope(std::slice::from_ref(full)),
                None => linear_slope(profile.blocks()),
            };
            match slope {
                Some(c1) if c1 > 0.0 => 1.0 / c1,
                Some(_) => f64::INFINITY,
                // Tabulated: best observed rate over the table.
                None => (1..)
                    .map_while(|n| {
                        let t = profile.full_time(n);
                        t.is_finite().then(|| n as f64 / t)
                    })
                    .fold(0.0, f64::max),
            }
        }
        BoundVariant::SlotLimited => {
            let n_max = profile.max_batch_within(slot_s, SystemConfig::DEFAULT_LATENCY_TOLERANCE_S, BATCH_CAP);
            if n_max == BATCH_CAP {
                f64::INFINITY
            } else {
                n_max as f64 / slot_s
            }
        }
    }
}

/// Sum of slopes when every term is linear.
fn linear_slope(terms: &[BatchTime]) -> Option<f64> {
    terms
        .iter()
        .map(|t| match t {
            BatchTime::Linear { c1, .. } => Some(*c1),
            BatchTime::Table(_) => None,
        })
        .sum()
}

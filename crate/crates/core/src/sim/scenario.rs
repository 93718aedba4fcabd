use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{LatencyProfile, SystemConfig};

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn centered(mean: f64, half_width: f64) -> Self {
        Self { lo: mean - half_width, hi: mean + half_width }
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Parameters of the static-batching baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticParams {
    pub batch_size: usize,
    pub timeout_s: f64,
}

/// Workload and system description for one simulation run.
///
/// Link SNR is `10^(snr_db / 10) * h^2 / avg_path_loss` with `h^2`
/// exponential of mean `avg_path_loss`, i.e. the transmit SNR is the mean
/// received SNR and fading is Rayleigh around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_id")]
    pub id: String,
    /// Poisson arrival rate in tasks per second.
    pub arrival_rate: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_path_loss")]
    pub avg_path_loss: f64,
    #[serde(default = "default_snr_db")]
    pub snr_db: f64,
    #[serde(default = "default_feature_bits")]
    pub feature_bits: u64,
    #[serde(default = "default_deadline")]
    pub deadline_dist: UniformRange,
    /// Weights over exits `1..=D`; empty means uniform.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exit_dist: Vec<f64>,
    /// Accuracy requirement drawn uniformly and mapped to the shallowest
    /// exit meeting it. Requirements above the deepest exit are clamped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_dist: Option<UniformRange>,
    #[serde(default = "default_config")]
    pub config: SystemConfig,
    #[serde(default = "LatencyProfile::synthetic_default")]
    pub profile: LatencyProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_batching: Option<StaticParams>,
}

fn default_id() -> String {
    "default".to_string()
}

fn default_path_loss() -> f64 {
    1e-3
}

fn default_snr_db() -> f64 {
    20.0
}

fn default_feature_bits() -> u64 {
    80_000
}

fn default_deadline() -> UniformRange {
    UniformRange::new(0.5, 2.0)
}

fn default_config() -> SystemConfig {
    SystemConfig::new(2e7, 0.25).expect("static config is valid")
}

impl Scenario {
    /// 20 MHz, 250 ms slots, 10 KB features, deadlines on `[0.5, 2]` s,
    /// exits uniform over the synthetic three-block profile.
    pub fn standard(arrival_rate: f64, duration_s: f64, seed: u64) -> Self {
        Self {
            id: default_id(),
            arrival_rate,
            duration_s,
            seed,
            avg_path_loss: default_path_loss(),
            snr_db: default_snr_db(),
            feature_bits: default_feature_bits(),
            deadline_dist: default_deadline(),
            exit_dist: Vec::new(),
            accuracy_dist: None,
            config: default_config(),
            profile: LatencyProfile::synthetic_default(),
            static_batching: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field: &'static str, reason: String| Err(ModelError::InvalidField { field, reason });
        if !(self.arrival_rate.is_finite() && self.arrival_rate > 0.0) {
            return bad("arrival_rate", format!("must be positive, got {}", self.arrival_rate));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad("duration_s", format!("must be positive, got {}", self.duration_s));
        }
        if !(self.avg_path_loss.is_finite() && self.avg_path_loss > 0.0) {
            return bad("avg_path_loss", format!("must be positive, got {}", self.avg_path_loss));
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db", "must be finite".into());
        }
        if self.feature_bits == 0 {
            return bad("feature_bits", "must be positive".into());
        }
        let d = self.deadline_dist;
        if !(d.lo > 0.0 && d.hi >= d.lo && d.hi.is_finite()) {
            return bad("deadline_dist", format!("need 0 < lo <= hi, got [{}, {}]", d.lo, d.hi));
        }
        let w = &self.exit_dist;
        if !w.is_empty()
            && (w.len() != self.profile.depth()
                || w.iter().any(|x| !(x.is_finite() && *x >= 0.0))
                || w.iter().sum::<f64>() <= 0.0)
        {
            return bad("exit_dist", format!("need {} non-negative weights with a positive sum", self.profile.depth()));
        }
        if let Some(r) = self.accuracy_dist {
            if !w.is_empty() {
                return bad("accuracy_dist", "give either exit_dist or accuracy_dist, not both".into());
            }
            if !(r.lo > 0.0 && r.hi >= r.lo && r.hi < 1.0) {
                return bad("accuracy_dist", format!("need 0 < lo <= hi < 1, got [{}, {}]", r.lo, r.hi));
            }
        }
        if let Some(p) = &self.static_batching {
            if p.batch_size == 0 || !(p.timeout_s > 0.0) {
                return bad("static_batching", "batch_size >= 1 and timeout_s > 0 required".into());
            }
        }
        self.config.validate()
    }

    /// Mean accuracy requirement, or mean delivered accuracy for
    /// categorical exits.
    pub fn mean_accuracy(&self) -> f64 {
        if let Some(r) = self.accuracy_dist {
            return r.mean();
        }
        let acc = self.profile.accuracy_per_exit();
        if self.exit_dist.is_empty() {
            acc.iter().sum::<f64>() / acc.len() as f64
        } else {
            self.exit_dist.iter().zip(acc).map(|(w, a)| w * a).sum::<f64>() / self.exit_dist.iter().sum::<f64>()
        }
    }

    pub fn mean_latency(&self) -> f64 {
        self.deadline_dist.mean()
    }
}

//! JSON schemas for instance files and the config/profile sub-documents
//! shared with scenario files. See `docs/formats/README.md`.

use serde::{Deserialize, Serialize};

use crate::error::{FormatError, ModelError};
use crate::model::{
    default_accuracy, exit_point_for_accuracy, BatchTime, Instance, LatencyProfile, LinkQuality, SystemConfig,
    TaskId, TaskRequest,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub total_bandwidth_hz: f64,
    #[serde(default = "one")]
    pub noise_power: f64,
    pub slot_duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comm_slot_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comp_slot_s: Option<f64>,
    #[serde(default = "default_bandwidth_tolerance")]
    pub bandwidth_tolerance: f64,
    #[serde(default = "default_latency_tolerance")]
    pub latency_tolerance_s: f64,
}

fn one() -> f64 {
    1.0
}

fn default_bandwidth_tolerance() -> f64 {
    SystemConfig::DEFAULT_BANDWIDTH_TOLERANCE
}

fn default_latency_tolerance() -> f64 {
    SystemConfig::DEFAULT_LATENCY_TOLERANCE_S
}

impl TryFrom<RawConfig> for SystemConfig {
    type Error = ModelError;

    fn try_from(raw: RawConfig) -> Result<Self, Self::Error> {
        let config = SystemConfig {
            total_bandwidth_hz: raw.total_bandwidth_hz,
            noise_power: raw.noise_power,
            slot_duration_s: raw.slot_duration_s,
            comm_slot_s: raw.comm_slot_s.unwrap_or(raw.slot_duration_s),
            comp_slot_s: raw.comp_slot_s.unwrap_or(raw.slot_duration_s),
            bandwidth_tolerance: raw.bandwidth_tolerance,
            latency_tolerance_s: raw.latency_tolerance_s,
        };
        config.validate()?;
        Ok(config)
    }
}

impl From<SystemConfig> for RawConfig {
    fn from(c: SystemConfig) -> Self {
        let explicit = |v: f64| (v != c.slot_duration_s).then_some(v);
        RawConfig {
            total_bandwidth_hz: c.total_bandwidth_hz,
            noise_power: c.noise_power,
            slot_duration_s: c.slot_duration_s,
            comm_slot_s: explicit(c.comm_slot_s),
            comp_slot_s: explicit(c.comp_slot_s),
            bandwidth_tolerance: c.bandwidth_tolerance,
            latency_tolerance_s: c.latency_tolerance_s,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLinear {
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawBatchTime {
    Linear { c0: f64, c1: f64 },
    Table(Vec<f64>),
}

impl From<RawBatchTime> for BatchTime {
    fn from(raw: RawBatchTime) -> Self {
        match raw {
            RawBatchTime::Linear { c0, c1 } => BatchTime::Linear { c0, c1 },
            RawBatchTime::Table(t) => BatchTime::Table(t),
        }
    }
}

impl From<&BatchTime> for RawBatchTime {
    fn from(b: &BatchTime) -> Self {
        match b {
            BatchTime::Linear { c0, c1 } => RawBatchTime::Linear { c0: *c0, c1: *c1 },
            BatchTime::Table(t) => RawBatchTime::Table(t.clone()),
        }
    }
}

/// Exactly one of `linear`, `table` or `blocks` describes the block times.
///
/// `table` rows are `[n, t_1, ..., t_D]` for consecutive `n = 1, 2, ...`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<RawLinear>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<RawBatchTime>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<RawBatchTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_per_exit: Option<Vec<f64>>,
}

impl TryFrom<RawProfile> for LatencyProfile {
    type Error = ModelError;

    fn try_from(raw: RawProfile) -> Result<Self, Self::Error> {
        let given = raw.linear.is_some() as u8 + raw.table.is_some() as u8 + raw.blocks.is_some() as u8;
        if given != 1 {
            return Err(ModelError::InvalidField {
                field: "profile",
                reason: "exactly one of `linear`, `table`, `blocks` is required".into(),
            });
        }
        let blocks: Vec<BatchTime> = if let Some(lin) = raw.linear {
            if lin.c0.len() != lin.c1.len() {
                return Err(ModelError::InvalidField {
                    field: "profile.linear",
                    reason: format!("c0 has {} entries but c1 has {}", lin.c0.len(), lin.c1.len()),
                });
            }
            lin.c0.iter().zip(&lin.c1).map(|(&c0, &c1)| BatchTime::Linear { c0, c1 }).collect()
        } else if let Some(rows) = raw.table {
            table_blocks(&rows)?
        } else {
            raw.blocks.unwrap_or_default().into_iter().map(BatchTime::from).collect()
        };
        let accuracy = raw.accuracy_per_exit.unwrap_or_else(|| default_accuracy(blocks.len().max(1)));
        LatencyProfile::with_full_time(blocks, raw.full.map(BatchTime::from), accuracy)
    }
}

fn table_blocks(rows: &[Vec<f64>]) -> Result<Vec<BatchTime>, ModelError> {
    let bad = |reason: String| ModelError::InvalidField { field: "profile.table", reason };
    let width = rows.first().map(Vec::len).ok_or_else(|| bad("table is empty".into()))?;
    if width < 2 {
        return Err(bad("rows must be [n, t_1, ..., t_D]".into()));
    }
    let mut columns = vec![Vec::with_capacity(rows.len()); width - 1];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(bad(format!("row {i} has {} entries, expected {width}", row.len())));
        }
        if row[0] != (i + 1) as f64 {
            return Err(bad(format!("row {i} has n={}, expected {}", row[0], i + 1)));
        }
        for (col, &t) in columns.iter_mut().zip(&row[1..]) {
            col.push(t);
        }
    }
    Ok(columns.into_iter().map(BatchTime::Table).collect())
}

impl From<LatencyProfile> for RawProfile {
    fn from(p: LatencyProfile) -> Self {
        let blocks = p.blocks();
        let mut raw = RawProfile {
            full: p.full_override().map(RawBatchTime::from),
            accuracy_per_exit: Some(p.accuracy_per_exit().to_vec()),
            ..Default::default()
        };
        let linear: Option<Vec<(f64, f64)>> = blocks
            .iter()
            .map(|b| match b {
                BatchTime::Linear { c0, c1 } => Some((*c0, *c1)),
                BatchTime::Table(_) => None,
            })
            .collect();
        let tables: Option<Vec<&Vec<f64>>> = blocks
            .iter()
            .map(|b| match b {
                BatchTime::Table(t) => Some(t),
                BatchTime::Linear { .. } => None,
            })
            .collect();
        if let Some(lin) = linear {
            raw.linear = Some(RawLinear { c0: lin.iter().map(|l| l.0).collect(), c1: lin.iter().map(|l| l.1).collect() });
        } else if let Some(tables) = tables.filter(|t| t.windows(2).all(|w| w[0].len() == w[1].len())) {
            let rows = tables[0].len();
            raw.table = Some(
                (0..rows)
                    .map(|r| std::iter::once((r + 1) as f64).chain(tables.iter().map(|t| t[r])).collect())
                    .collect(),
            );
        } else {
            raw.blocks = Some(blocks.iter().map(RawBatchTime::from).collect());
        }
        raw
    }
}

/// A task as written in an instance file: either `snr` or
/// (`channel_gain`, `tx_power`), and either `exit_point` or `accuracy_req`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTask {
    pub id: TaskId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power: Option<f64>,
    pub feature_bits: u64,
    pub deadline_s: f64,
    #[serde(default)]
    pub waiting_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_point: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_req: Option<f64>,
}

impl RawTask {
    fn into_task(self, profile: &LatencyProfile) -> Result<TaskRequest, FormatError> {
        let id = self.id;
        let err = |reason: &str| FormatError::Task { id, reason: reason.to_string() };
        let link = match (self.snr, self.channel_gain, self.tx_power) {
            (Some(snr), None, None) => LinkQuality::Snr { snr },
            (None, Some(channel_gain), Some(tx_power)) => LinkQuality::Channel { channel_gain, tx_power },
            _ => return Err(err("give either `snr` or both `channel_gain` and `tx_power`")),
        };
        let exit_point = match (self.exit_point, self.accuracy_req) {
            (Some(exit), _) => exit,
            (None, Some(a)) => exit_point_for_accuracy(a, profile)
                .map_err(|e| FormatError::Task { id, reason: format!("accuracy_req: {e}") })?,
            (None, None) => return Err(err("missing `exit_point` (or `accuracy_req`)")),
        };
        Ok(TaskRequest {
            id,
            link,
            feature_bits: self.feature_bits,
            deadline_s: self.deadline_s,
            waiting_s: self.waiting_s,
            exit_point,
            accuracy_req: self.accuracy_req,
        })
    }
}

impl From<&TaskRequest> for RawTask {
    fn from(t: &TaskRequest) -> Self {
        let (snr, channel_gain, tx_power) = match t.link {
            LinkQuality::Snr { snr } => (Some(snr), None, None),
            LinkQuality::Channel { channel_gain, tx_power } => (None, Some(channel_gain), Some(tx_power)),
        };
        RawTask {
            id: t.id,
            snr,
            channel_gain,
            tx_power,
            feature_bits: t.feature_bits,
            deadline_s: t.deadline_s,
            waiting_s: t.waiting_s,
            exit_point: Some(t.exit_point),
            accuracy_req: t.accuracy_req,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub config: SystemConfig,
    pub profile: LatencyProfile,
    pub tasks: Vec<RawTask>,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub bandwidth_limited: bool,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance, FormatError> {
        let tasks = self.tasks.into_iter().map(|t| t.into_task(&self.profile)).collect::<Result<Vec<_>, _>>()?;
        let instance = Instance::new(self.config, self.profile, tasks)?;
        Ok(if self.bandwidth_limited { instance } else { instance.without_bandwidth_limit() })
    }

    pub fn from_instance(instance: &Instance) -> Self {
        InstanceFile {
            config: *instance.config(),
            profile: instance.profile().clone(),
            tasks: instance.tasks().iter().map(RawTask::from).collect(),
            bandwidth_limited: instance.bandwidth_limited(),
        }
    }
}

pub fn parse_instance(json: &str) -> Result<Instance, FormatError> {
    serde_json::from_str::<InstanceFile>(json)?.into_instance()
}

pub fn instance_to_json(instance: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(instance)).expect("instance serializes")
}

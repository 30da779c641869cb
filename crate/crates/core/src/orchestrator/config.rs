//! Scenario files: TOML with one table per subsystem.
//!
//! ```toml
//! name = "generic-ct-spq"
//! seed = 7
//! duration_s = 10.0
//! stream_set = "theta"          # theta | psi | omega | custom
//! selection = "spq"             # none | spq | tas
//!
//! [cross_traffic]
//! rate_bps = 2_000_000_000
//!
//! [gcl]                         # only read when selection = "tas"
//! config = 3
//! slot_units = 1
//! ```
//!
//! Every table is optional; omitted keys take the defaults documented on the
//! corresponding struct.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clocks::ServoConfig;
use crate::sender_tas::SenderTasConfig;
use crate::simcore::{SimTime, NS_PER_S};
use crate::switch::{
    parse_mask, Gcl, GclEntry, GclError, GclTemplate, PortConfig, Selection, DEFAULT_CUT_THROUGH_BYTES,
    DEFAULT_PROCESSING_NS, DEFAULT_QUEUE_LIMIT_BYTES, DEFAULT_SHARED_BUFFER_BYTES, GCL_UNIT_NS,
};
use crate::traffic::{
    build_stream_set, CrossSize, CrossTrafficSpec, JitterProfile, StreamSetId, StreamSpec, TrafficError, GIGABIT,
    MAX_PAYLOAD_BYTES,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("scenario has no seed; runs must be seeded explicitly")]
    MissingSeed,
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("stream set `custom` needs at least one [[streams]] entry")]
    NoStreams,
    #[error(transparent)]
    Stream(#[from] TrafficError),
    #[error(transparent)]
    Gcl(#[from] GclError),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StreamSetChoice {
    #[default]
    Theta,
    Psi,
    Omega,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SelectionKind {
    #[default]
    None,
    Spq,
    Tas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossTrafficConfig {
    pub enabled: bool,
    /// Offered load summed over all links, counting preamble and gap.
    pub rate_bps: u64,
    pub size: CrossSize,
    pub links: u32,
    /// Frames a cross-traffic NIC may queue before dropping.
    pub nic_queue_frames: usize,
}

impl Default for CrossTrafficConfig {
    fn default() -> Self {
        let spec = CrossTrafficSpec::default();
        CrossTrafficConfig {
            enabled: false,
            rate_bps: spec.rate_bps,
            size: spec.size,
            links: spec.links,
            nic_queue_frames: 64,
        }
    }
}

impl CrossTrafficConfig {
    pub fn spec(&self) -> CrossTrafficSpec {
        CrossTrafficSpec {
            rate_bps: self.rate_bps,
            size: self.size,
            links: self.links,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchConfig {
    pub link_rate_bps: u64,
    pub shared_buffer_bytes: u32,
    /// Per-queue cap under spq/tas; 0 disables it.
    pub queue_limit_bytes: u32,
    pub cut_through_threshold_bytes: u32,
    pub processing_delay_ns: u64,
    /// Record every egress departure (needed for event-log checks).
    pub log_departures: bool,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        SwitchConfig {
            link_rate_bps: GIGABIT,
            shared_buffer_bytes: DEFAULT_SHARED_BUFFER_BYTES,
            queue_limit_bytes: DEFAULT_QUEUE_LIMIT_BYTES,
            cut_through_threshold_bytes: DEFAULT_CUT_THROUGH_BYTES,
            processing_delay_ns: DEFAULT_PROCESSING_NS,
            log_departures: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GclRow {
    /// Eight characters, leftmost is queue 7.
    pub mask: String,
    pub duration_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GclConfig {
    /// Template 1-4; ignored when `entries` is non-empty.
    pub config: u8,
    pub unit_ns: u64,
    pub slot_units: u64,
    pub guard_band: bool,
    /// Refuse to start a frame that would overrun its gate's close.
    pub strict_length_check: bool,
    pub base_time_ns: u64,
    pub entries: Vec<GclRow>,
}

impl Default for GclConfig {
    fn default() -> Self {
        GclConfig {
            config: 1,
            unit_ns: GCL_UNIT_NS,
            slot_units: 1,
            guard_band: false,
            strict_length_check: false,
            base_time_ns: 0,
            entries: Vec::new(),
        }
    }
}

impl GclConfig {
    pub fn build(&self) -> Result<Gcl, ConfigError> {
        let base = SimTime(self.base_time_ns);
        if self.entries.is_empty() {
            return Ok(GclTemplate {
                config: self.config,
                unit_ns: self.unit_ns,
                slot_units: self.slot_units,
                guard_band: self.guard_band,
            }
            .build(base)?);
        }
        let entries = self
            .entries
            .iter()
            .map(|r| {
                Ok(GclEntry {
                    gate_mask: parse_mask(&r.mask)?,
                    duration_ns: r.duration_ns,
                })
            })
            .collect::<Result<Vec<_>, GclError>>()?;
        Ok(Gcl::new(entries, base)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PtpConfig {
    pub sync_rate_per_s: u32,
    pub warmup_s: f64,
    /// Largest |slave - grandmaster| accepted during the measurement window.
    pub deviation_threshold_ns: i64,
    /// Fixed drift for every slave; when absent each slave draws uniformly
    /// from `±max_drift_ppm`.
    pub slave_drift_ppm: Option<f64>,
    pub max_drift_ppm: f64,
    /// Slaves start with a uniform phase error in `±max_initial_offset_ns`.
    pub max_initial_offset_ns: i64,
    pub frame_bytes: u32,
    /// Standard deviation of the error on each hardware timestamp.
    pub timestamp_noise_ns: f64,
    /// Slave delay between Sync reception and Delay_Req submission.
    pub turnaround_ns: u64,
    pub servo: ServoConfig,
}

impl Default for PtpConfig {
    fn default() -> Self {
        PtpConfig {
            sync_rate_per_s: 16,
            warmup_s: 5.0,
            deviation_threshold_ns: 100,
            slave_drift_ppm: None,
            max_drift_ppm: 100.0,
            max_initial_offset_ns: 1_000_000,
            frame_bytes: 90,
            timestamp_noise_ns: 4.0,
            turnaround_ns: 20_000,
            servo: ServoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Gap between cross-traffic start and stream start.
    pub epsilon_s: f64,
    /// Time allowed after the last emission for in-flight frames to arrive.
    pub drain_s: f64,
    /// Draw each stream's start offset uniformly over its cycle (or over the
    /// GCL cycle under TAS). Explicit `start_offset_ns` values are added.
    pub random_start: bool,
    /// Run every stream alone (without cross traffic) and merge the results.
    pub isolated_streams: bool,
    /// Frames a sender NIC may queue before dropping.
    pub nic_queue_frames: usize,
    pub max_attempts: u32,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig {
            epsilon_s: 0.1,
            drain_s: 0.05,
            random_start: true,
            isolated_streams: false,
            nic_queue_frames: 1024,
            max_attempts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            formats: vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub seed: Option<u64>,
    pub duration_s: f64,
    #[serde(default)]
    pub stream_set: StreamSetChoice,
    /// Stream definitions for `stream_set = "custom"`.
    #[serde(default)]
    pub streams: Vec<StreamSpec>,
    /// Trace files (CSV) added as extra streams.
    #[serde(default)]
    pub traces: Vec<PathBuf>,
    /// Jitter applied to every stream that has no entry in `stream_jitter`.
    #[serde(default)]
    pub jitter: Option<JitterProfile>,
    #[serde(default)]
    pub stream_jitter: BTreeMap<String, JitterProfile>,
    #[serde(default)]
    pub selection: SelectionKind,
    #[serde(default)]
    pub gcl: GclConfig,
    #[serde(default)]
    pub switch: SwitchConfig,
    #[serde(default)]
    pub cross_traffic: CrossTrafficConfig,
    #[serde(default)]
    pub sender_tas: SenderTasConfig,
    #[serde(default)]
    pub ptp: PtpConfig,
    #[serde(default)]
    pub measurement: MeasurementConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A validated scenario with every derived quantity materialized.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub name: String,
    pub seed: u64,
    pub duration_ns: u64,
    pub warmup_ns: u64,
    pub epsilon_ns: u64,
    pub drain_ns: u64,
    pub streams: Vec<StreamSpec>,
    pub port: PortConfig,
    pub gcl: Option<Gcl>,
    pub cross: Option<CrossTrafficConfig>,
    pub sender_tas: SenderTasConfig,
    pub ptp: PtpConfig,
    pub measurement: MeasurementConfig,
}

fn secs_to_ns(key: &str, s: f64, allow_zero: bool) -> Result<u64, ConfigError> {
    if !s.is_finite() || s < 0.0 || (!allow_zero && s == 0.0) {
        return Err(invalid(key, format!("{s} is not a valid duration")));
    }
    Ok((s * NS_PER_S as f64).round() as u64)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Parses `text`, applies `key = value` overrides on dotted paths, then
    /// deserializes. Values are TOML literals; bare words are taken as strings.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for (key, value) in overrides {
            set_dotted(&mut table, key, parse_literal(value))?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<Resolved, ConfigError> {
        let seed = self.seed.ok_or(ConfigError::MissingSeed)?;
        let duration_ns = secs_to_ns("duration_s", self.duration_s, false)?;
        let warmup_ns = secs_to_ns("ptp.warmup_s", self.ptp.warmup_s, true)?;
        let epsilon_ns = secs_to_ns("measurement.epsilon_s", self.measurement.epsilon_s, true)?;
        let drain_ns = secs_to_ns("measurement.drain_s", self.measurement.drain_s, true)?;
        if self.ptp.sync_rate_per_s == 0 {
            return Err(invalid("ptp.sync_rate_per_s", "must be positive"));
        }
        if !(self.ptp.max_drift_ppm.is_finite() && self.ptp.max_drift_ppm >= 0.0) {
            return Err(invalid("ptp.max_drift_ppm", "must be non-negative"));
        }
        if !(self.ptp.timestamp_noise_ns.is_finite() && self.ptp.timestamp_noise_ns >= 0.0) {
            return Err(invalid("ptp.timestamp_noise_ns", "must be non-negative"));
        }
        if self.ptp.frame_bytes < 64 {
            return Err(invalid("ptp.frame_bytes", "below the minimum frame size"));
        }
        if self.measurement.max_attempts == 0 {
            return Err(invalid("measurement.max_attempts", "must be positive"));
        }
        if self.switch.link_rate_bps == 0 {
            return Err(invalid("switch.link_rate_bps", "must be positive"));
        }
        if self.cross_traffic.enabled && self.cross_traffic.links == 0 {
            return Err(invalid("cross_traffic.links", "must be positive"));
        }

        let mut streams = match self.stream_set {
            StreamSetChoice::Theta => build_stream_set(StreamSetId::Theta),
            StreamSetChoice::Psi => build_stream_set(StreamSetId::Psi),
            StreamSetChoice::Omega => build_stream_set(StreamSetId::Omega),
            StreamSetChoice::Custom => {
                if self.streams.is_empty() && self.traces.is_empty() {
                    return Err(ConfigError::NoStreams);
                }
                self.streams.clone()
            }
        };
        for path in &self.traces {
            streams.push(crate::traffic::load_trace(path)?);
        }
        for s in &mut streams {
            if let Some(j) = self.stream_jitter.get(&s.name).or(self.jitter.as_ref()) {
                s.jitter = *j;
            }
            s.validate()?;
            if s.pcp == crate::traffic::PCP_PTP {
                return Err(invalid(
                    "streams.pcp",
                    format!("stream `{}` uses the PTP priority", s.name),
                ));
            }
        }
        for name in self.stream_jitter.keys() {
            if !streams.iter().any(|s| &s.name == name) {
                return Err(invalid("stream_jitter", format!("no stream named `{name}`")));
            }
        }

        let gcl = match self.selection {
            SelectionKind::Tas => Some(self.gcl.build()?),
            _ => None,
        };
        let selection = match (&self.selection, &gcl) {
            (SelectionKind::None, _) => Selection::None,
            (SelectionKind::Spq, _) => Selection::Spq,
            (SelectionKind::Tas, Some(g)) => Selection::Tas(g.clone()),
            (SelectionKind::Tas, None) => unreachable!("gcl built above"),
        };
        if self.sender_tas.enabled && gcl.is_none() {
            return Err(invalid(
                "sender_tas.enabled",
                "sender-side TAS needs selection = \"tas\"",
            ));
        }
        if self.sender_tas.dilation == 0 {
            return Err(invalid("sender_tas.dilation", "must be at least 1"));
        }
        let port = PortConfig {
            link_rate_bps: self.switch.link_rate_bps,
            selection,
            shared_buffer_bytes: self.switch.shared_buffer_bytes,
            queue_limit_bytes: (self.switch.queue_limit_bytes > 0).then_some(self.switch.queue_limit_bytes),
            cut_through_threshold_bytes: self.switch.cut_through_threshold_bytes,
            processing_delay_ns: self.switch.processing_delay_ns,
            strict_length_check: self.gcl.strict_length_check,
            log_departures: self.switch.log_departures,
        };
        if port.shared_buffer_bytes < MAX_PAYLOAD_BYTES + 50 {
            return Err(invalid("switch.shared_buffer_bytes", "smaller than one full frame"));
        }

        Ok(Resolved {
            name: if self.name.is_empty() {
                "scenario".to_string()
            } else {
                self.name.clone()
            },
            seed,
            duration_ns,
            warmup_ns,
            epsilon_ns,
            drain_ns,
            streams,
            port,
            gcl,
            cross: self.cross_traffic.enabled.then_some(self.cross_traffic),
            sender_tas: self.sender_tas,
            ptp: self.ptp,
            measurement: self.measurement,
        })
    }
}

/// TOML literal if it parses as one, otherwise a plain string.
fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(invalid(key, "malformed key"));
    }
    let (last, path) = parts.split_last().expect("non-empty split");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry((*p).to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| invalid(key, format!("`{p}` is not a table")))?;
    }
    cur.insert((*last).to_string(), value);
    Ok(())
}

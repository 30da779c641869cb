//! Scenario execution: configuration, the testbed event loop, the
//! measurement procedure with its PTP health check, statistics and export.

pub mod config;
pub mod export;
pub mod presets;
pub mod stats;
pub mod testbed;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::derive_seed;
use crate::switch::Departure;

pub use config::{ConfigError, OutputFormat, Resolved, ScenarioConfig};
pub use stats::{ccdf, summary_stats, EmptySamples, SummaryStats};
pub use testbed::{
    Attempt, Conservation, CrossTally, DeviationSample, MeasurementRecord, PtpTally, StreamTally, CROSS_STREAM_BASE,
    PTP_STREAM,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("PTP deviation above {threshold_ns} ns in all {attempts} attempts (last: {last})")]
    RetryExhausted {
        attempts: u32,
        threshold_ns: i64,
        last: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamResult {
    pub name: String,
    pub pcp: u8,
    #[serde(flatten)]
    pub tally: StreamTally,
    pub stats: Option<SummaryStats>,
    pub records: Vec<MeasurementRecord>,
}

impl StreamResult {
    pub fn latencies(&self) -> Vec<i64> {
        self.records.iter().map(|r| r.latency_ns).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    /// Seed of the accepted attempt (equal to `seed` when no retry happened).
    pub attempt_seed: u64,
    pub retry_count: u32,
    pub warmup_end_ns: u64,
    pub measurement_start_ns: u64,
    pub measurement_end_ns: u64,
    pub streams: Vec<StreamResult>,
    pub cross: CrossTally,
    pub ptp: PtpTally,
    /// Largest |deviation| after PTP warm-up.
    pub max_abs_deviation_ns: Option<i64>,
    pub deviations: Vec<DeviationSample>,
    pub conservation: Conservation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub departures: Vec<Departure>,
}

impl RunResult {
    pub fn stream(&self, name: &str) -> Option<&StreamResult> {
        self.streams.iter().find(|s| s.name == name)
    }

    /// Deviation samples taken after PTP warm-up.
    pub fn post_warmup_deviations(&self) -> impl Iterator<Item = &DeviationSample> {
        self.deviations.iter().filter(move |d| d.true_ns >= self.warmup_end_ns)
    }

    pub fn switch_drops(&self) -> u64 {
        self.streams.iter().map(|s| s.tally.switch_drops).sum()
    }

    pub fn sender_drops(&self) -> u64 {
        self.streams.iter().map(|s| s.tally.sender_drops).sum()
    }
}

/// One attempt over the configured topology; isolated mode runs each stream
/// alone and merges.
pub fn run_attempt(r: &Resolved, seed: u64) -> Attempt {
    if !r.measurement.isolated_streams {
        return testbed::simulate(r, &r.streams, true, seed);
    }
    let mut merged: Option<Attempt> = None;
    for k in 0..r.streams.len() {
        let mut a = testbed::simulate(r, &r.streams[k..=k], false, seed);
        for rec in &mut a.records[0] {
            rec.stream = k as u32;
        }
        for d in &mut a.deviations {
            if d.slave_id == 1 {
                d.slave_id = k as u32 + 1;
            }
        }
        for dep in &mut a.departures {
            if dep.stream == 0 {
                dep.stream = k as u32;
            }
        }
        match merged.as_mut() {
            None => merged = Some(a),
            Some(m) => {
                m.records.append(&mut a.records);
                m.tallies.append(&mut a.tallies);
                m.deviations.append(&mut a.deviations);
                m.departures.append(&mut a.departures);
                m.conservation.add(&a.conservation);
                m.ptp.exchanges += a.ptp.exchanges;
                m.ptp.sync_timeouts += a.ptp.sync_timeouts;
                m.ptp.anomalies += a.ptp.anomalies;
                m.ptp.frames_dropped += a.ptp.frames_dropped;
                m.all_locked &= a.all_locked;
                m.measurement_end_ns = m.measurement_end_ns.max(a.measurement_end_ns);
            }
        }
    }
    let mut m = merged.expect("validated scenarios have streams");
    m.deviations.sort_by_key(|d| (d.true_ns, d.slave_id));
    m
}

fn attempt_seed(seed: u64, attempt: u32) -> u64 {
    if attempt == 0 {
        seed
    } else {
        derive_seed(seed, u64::from(attempt))
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult, ScenarioError> {
    let r = cfg.validate()?;
    run_resolved(&r)
}

/// The measurement procedure: repeat with derived seeds while the clocks
/// are unlocked or drift past the threshold during measurement.
pub fn run_resolved(r: &Resolved) -> Result<RunResult, ScenarioError> {
    let threshold = r.ptp.deviation_threshold_ns;
    let mut last = String::new();
    for attempt in 0..r.measurement.max_attempts {
        let seed = attempt_seed(r.seed, attempt);
        let a = run_attempt(r, seed);
        let worst = a.max_abs_deviation();
        let healthy = a.all_locked && worst.is_none_or(|d| d <= threshold);
        if healthy {
            log::info!(
                "{}: accepted attempt {} (max |deviation| {:?} ns)",
                r.name,
                attempt + 1,
                worst
            );
            return Ok(assemble(r, a, attempt));
        }
        last = match worst {
            Some(d) if a.all_locked => format!("{d} ns"),
            Some(d) => format!("{d} ns, clocks unlocked"),
            None => "clocks unlocked".to_string(),
        };
        log::warn!("{}: attempt {} rejected: {last}", r.name, attempt + 1);
    }
    Err(ScenarioError::RetryExhausted {
        attempts: r.measurement.max_attempts,
        threshold_ns: threshold,
        last,
    })
}

fn assemble(r: &Resolved, a: Attempt, retry_count: u32) -> RunResult {
    let max_abs_deviation_ns = a.max_abs_deviation();
    let streams = r
        .streams
        .iter()
        .zip(a.records)
        .zip(a.tallies)
        .map(|((spec, records), tally)| {
            let lat: Vec<i64> = records.iter().map(|x| x.latency_ns).collect();
            StreamResult {
                name: spec.name.clone(),
                pcp: spec.pcp,
                tally,
                stats: summary_stats(&lat).ok(),
                records,
            }
        })
        .collect();
    RunResult {
        scenario: r.name.clone(),
        seed: r.seed,
        attempt_seed: a.seed,
        retry_count,
        warmup_end_ns: a.warmup_end_ns,
        measurement_start_ns: a.measurement_start_ns,
        measurement_end_ns: a.measurement_end_ns,
        streams,
        cross: a.cross,
        ptp: a.ptp,
        max_abs_deviation_ns,
        deviations: a.deviations,
        conservation: a.conservation,
        departures: a.departures,
    }
}

/// One sweep point: the override value and its outcome.
pub struct SweepPoint {
    pub value: String,
    pub result: Result<RunResult, ScenarioError>,
}

/// Runs `text` once per value of `key`, in parallel. Each point is named
/// `<name>-<key>-<value>`.
pub fn sweep(text: &str, key: &str, values: &[String], extra: &[(String, String)]) -> Vec<SweepPoint> {
    values
        .par_iter()
        .map(|v| {
            let mut overrides = extra.to_vec();
            overrides.push((key.to_string(), v.clone()));
            let result = ScenarioConfig::from_toml_with_overrides(text, &overrides)
                .map_err(ScenarioError::from)
                .and_then(|mut cfg| {
                    let base = if cfg.name.is_empty() {
                        "scenario".to_string()
                    } else {
                        cfg.name.clone()
                    };
                    cfg.name = format!("{base}-{key}-{v}");
                    run_scenario(&cfg)
                });
            SweepPoint {
                value: v.clone(),
                result,
            }
        })
        .collect()
}

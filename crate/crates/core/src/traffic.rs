//! Stream definitions, emission schedules, jitter profiles, cross traffic and
//! trace ingestion.
//!
//! Schedules are produced by lazy iterators so a multi-second run at 2 Gb/s
//! never materializes millions of emissions up front; the `generate_*`
//! functions collect them for callers that want a `Vec`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::{SimRng, NS_PER_S};

/// Ethernet + VLAN + IPv4 + UDP headers and FCS around the application payload.
pub const FRAME_OVERHEAD_BYTES: u32 = 50;
/// Preamble, SFD and inter-frame gap occupied on the wire per frame.
pub const WIRE_OVERHEAD_BYTES: u32 = 20;
pub const MAX_PAYLOAD_BYTES: u32 = 1472;
pub const MIN_FRAME_BYTES: u32 = 64;
pub const MAX_FRAME_BYTES: u32 = 1522;
pub const GIGABIT: u64 = 1_000_000_000;

/// Bounds for variable application sizes drawn from a distribution.
pub const MIN_APP_BYTES: u32 = 18;
pub const MAX_APP_BYTES: u32 = 1_000_000;

pub const PCP_PTP: u8 = 7;
pub const PCP_CROSS: u8 = 0;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("unknown stream set `{0}` (expected theta, psi or omega)")]
    UnknownStreamSet(String),
    #[error("unknown jitter preset `{0}`")]
    UnknownJitterPreset(String),
    #[error("invalid stream `{stream}`: {reason}")]
    InvalidStream { stream: String, reason: String },
    #[error("trace {path}: line {line}: {reason}")]
    TraceParse { path: String, line: u64, reason: String },
    #[error("trace {path}: offsets must be non-decreasing (line {line})")]
    TraceOutOfOrder { path: String, line: u64 },
    #[error("trace {path}: {source}")]
    TraceIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// On-wire frame size for an application payload, padded to the Ethernet minimum.
pub fn on_wire_bytes(payload_bytes: u32) -> u32 {
    (payload_bytes + FRAME_OVERHEAD_BYTES).max(MIN_FRAME_BYTES)
}

/// Time the frame occupies a link of `rate_bps`, including preamble and gap,
/// rounded to the nearest nanosecond.
pub fn serialization_time(on_wire_bytes: u32, rate_bps: u64) -> u64 {
    assert!(rate_bps > 0, "link rate must be positive");
    let bits = u128::from(on_wire_bytes + WIRE_OVERHEAD_BYTES) * 8;
    let num = bits * u128::from(NS_PER_S);
    let rate = u128::from(rate_bps);
    ((num + rate / 2) / rate) as u64
}

/// Splits an application burst into maximum-size payloads plus the remainder.
pub fn fragment(burst_bytes: u32) -> Vec<u32> {
    let full = burst_bytes / MAX_PAYLOAD_BYTES;
    let rest = burst_bytes % MAX_PAYLOAD_BYTES;
    let mut out = vec![MAX_PAYLOAD_BYTES; full as usize];
    if rest > 0 {
        out.push(rest);
    }
    out
}

/// A frame travelling through the testbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    /// Index of the originating stream (see the testbed's stream table).
    pub stream: u32,
    pub seq: u64,
    pub pcp: u8,
    pub payload_bytes: u32,
    pub on_wire_bytes: u32,
    /// Sender local time at first bit on the wire; set by the sender NIC.
    pub tx_ts_ns: i64,
    /// True time the application handed the frame to the stack.
    pub emit_true_ns: u64,
}

impl Frame {
    pub fn new(stream: u32, seq: u64, pcp: u8, payload_bytes: u32, emit_true_ns: u64) -> Self {
        Frame {
            stream,
            seq,
            pcp,
            payload_bytes,
            on_wire_bytes: on_wire_bytes(payload_bytes),
            tx_ts_ns: 0,
            emit_true_ns,
        }
    }

    /// A frame of an exact on-wire size (used for padded minimum frames and
    /// uniform frame-size models).
    pub fn with_wire_size(stream: u32, seq: u64, pcp: u8, on_wire: u32, emit_true_ns: u64) -> Self {
        let mut f = Frame::new(
            stream,
            seq,
            pcp,
            on_wire.saturating_sub(FRAME_OVERHEAD_BYTES),
            emit_true_ns,
        );
        f.on_wire_bytes = on_wire;
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JitterKind {
    Ideal,
    Gaussian,
    GaussianWithOutliers,
}

/// Sender timing noise. `stddev_ns` is the standard deviation of the
/// deviation from the nominal cycle time between consecutive emissions, so
/// each emission draws an independent offset with `stddev_ns / sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "JitterRepr")]
pub struct JitterProfile {
    pub kind: JitterKind,
    pub stddev_ns: u64,
    /// Outlier probability as (numerator, denominator).
    pub outlier_prob: (u64, u64),
    pub outlier_magnitude_ns: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JitterRepr {
    Preset(String),
    Full {
        kind: JitterKind,
        #[serde(default)]
        stddev_ns: u64,
        #[serde(default = "no_outliers")]
        outlier_prob: (u64, u64),
        #[serde(default)]
        outlier_magnitude_ns: u64,
    },
}

fn no_outliers() -> (u64, u64) {
    (0, 1)
}

impl TryFrom<JitterRepr> for JitterProfile {
    type Error = TrafficError;

    fn try_from(r: JitterRepr) -> Result<Self, Self::Error> {
        match r {
            JitterRepr::Preset(name) => name.parse(),
            JitterRepr::Full {
                kind,
                stddev_ns,
                outlier_prob,
                outlier_magnitude_ns,
            } => {
                if outlier_prob.1 == 0 || outlier_prob.0 > outlier_prob.1 {
                    return Err(TrafficError::InvalidStream {
                        stream: "<jitter>".into(),
                        reason: "outlier probability must be a fraction in [0, 1]".into(),
                    });
                }
                Ok(JitterProfile {
                    kind,
                    stddev_ns,
                    outlier_prob,
                    outlier_magnitude_ns,
                })
            }
        }
    }
}

impl JitterProfile {
    pub const IDEAL: JitterProfile = JitterProfile {
        kind: JitterKind::Ideal,
        stddev_ns: 0,
        outlier_prob: (0, 1),
        outlier_magnitude_ns: 0,
    };

    pub fn gaussian(stddev_ns: u64) -> Self {
        JitterProfile {
            kind: JitterKind::Gaussian,
            stddev_ns,
            ..Self::IDEAL
        }
    }

    /// DPDK-based generator.
    pub fn dpdk() -> Self {
        Self::gaussian(139)
    }

    /// Kernel socket replay with rare multi-millisecond stalls.
    pub fn socket() -> Self {
        JitterProfile {
            kind: JitterKind::GaussianWithOutliers,
            stddev_ns: 11_000,
            outlier_prob: (1, 10_000),
            outlier_magnitude_ns: 2_250_000,
        }
    }

    /// Application released through a sender-side gate schedule.
    pub fn sender_tas() -> Self {
        Self::gaussian(19_200)
    }

    fn offset_stddev(&self) -> f64 {
        self.stddev_ns as f64 / std::f64::consts::SQRT_2
    }
}

impl Default for JitterProfile {
    fn default() -> Self {
        Self::IDEAL
    }
}

impl FromStr for JitterProfile {
    type Err = TrafficError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ideal" => Ok(Self::IDEAL),
            "dpdk" => Ok(Self::dpdk()),
            "socket" => Ok(Self::socket()),
            "sender-tas" => Ok(Self::sender_tas()),
            other => Err(TrafficError::UnknownJitterPreset(other.to_string())),
        }
    }
}

/// Draws per-emission offsets and keeps emissions strictly ordered.
#[derive(Debug, Clone)]
pub struct Jitter {
    profile: JitterProfile,
    normal: Option<Normal<f64>>,
    last_emit: Option<u64>,
}

impl Jitter {
    pub fn new(profile: JitterProfile) -> Self {
        let normal = match profile.kind {
            JitterKind::Ideal => None,
            _ if profile.stddev_ns == 0 => None,
            _ => Some(Normal::new(0.0, profile.offset_stddev()).expect("finite stddev")),
        };
        Jitter {
            profile,
            normal,
            last_emit: None,
        }
    }

    /// Realized emission time for a nominal instant.
    pub fn apply(&mut self, nominal_ns: u64, rng: &mut SimRng) -> u64 {
        let mut t = nominal_ns as i64;
        if let Some(n) = &self.normal {
            t += n.sample(rng).round() as i64;
        }
        if self.profile.kind == JitterKind::GaussianWithOutliers {
            let (num, den) = self.profile.outlier_prob;
            if num > 0 && rng.random_range(0..den) < num {
                t += self.profile.outlier_magnitude_ns as i64;
            }
        }
        let mut emit = t.max(0) as u64;
        if let Some(prev) = self.last_emit {
            emit = emit.max(prev + 1);
        }
        self.last_emit = Some(emit);
        emit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Periodicity {
    Cyclic {
        cycle_ns: u64,
    },
    /// Renewal process with exponential gaps.
    Acyclic {
        mean_gap_ns: u64,
    },
    /// Verbatim replay of recorded (offset, payload) rows.
    Trace {
        rows: Vec<TraceRow>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub offset_ns: u64,
    pub payload_bytes: u32,
}

/// Application data per emission. Bursts larger than one payload are
/// fragmented into back-to-back frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PayloadSize {
    Fixed {
        bytes: u32,
    },
    /// Moment-matched log-normal, truncated to [18, 10^6] B by resampling.
    LogNormal {
        mean: f64,
        stddev: f64,
    },
    /// One frame per emission with on-wire size uniform in [min_frame, max_frame].
    UniformFrame {
        min_frame: u32,
        max_frame: u32,
    },
    /// Sizes come from the trace rows.
    FromTrace,
}

impl PayloadSize {
    /// Log-normal (mu, sigma) whose mean and stddev equal the given moments.
    pub fn lognormal_params(mean: f64, stddev: f64) -> (f64, f64) {
        let sigma2 = (1.0 + (stddev * stddev) / (mean * mean)).ln();
        (mean.ln() - sigma2 / 2.0, sigma2.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub name: String,
    pub pcp: u8,
    pub periodicity: Periodicity,
    pub payload: PayloadSize,
    #[serde(default)]
    pub start_offset_ns: u64,
    #[serde(default)]
    pub jitter: JitterProfile,
}

impl StreamSpec {
    pub fn cyclic(name: &str, pcp: u8, cycle_ns: u64, payload: PayloadSize) -> Self {
        StreamSpec {
            name: name.to_string(),
            pcp,
            periodicity: Periodicity::Cyclic { cycle_ns },
            payload,
            start_offset_ns: 0,
            jitter: JitterProfile::IDEAL,
        }
    }

    pub fn acyclic(name: &str, pcp: u8, mean_gap_ns: u64, payload: PayloadSize) -> Self {
        StreamSpec {
            periodicity: Periodicity::Acyclic { mean_gap_ns },
            ..Self::cyclic(name, pcp, 1, payload)
        }
    }

    pub fn with_jitter(mut self, jitter: JitterProfile) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn with_start_offset(mut self, ns: u64) -> Self {
        self.start_offset_ns = ns;
        self
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        let bad = |reason: &str| {
            Err(TrafficError::InvalidStream {
                stream: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.pcp > 7 {
            return bad("pcp must be in 0..=7");
        }
        match (&self.periodicity, &self.payload) {
            (Periodicity::Cyclic { cycle_ns: 0 }, _) => return bad("cyclic streams need cycle_ns > 0"),
            (Periodicity::Acyclic { mean_gap_ns: 0 }, _) => return bad("acyclic streams need mean_gap_ns > 0"),
            (Periodicity::Trace { .. }, PayloadSize::FromTrace) => {}
            (Periodicity::Trace { .. }, _) | (_, PayloadSize::FromTrace) => {
                return bad("trace periodicity and trace payload go together")
            }
            _ => {}
        }
        match self.payload {
            PayloadSize::Fixed { bytes } if !(MIN_APP_BYTES..=MAX_APP_BYTES).contains(&bytes) => {
                bad("fixed payload must be within [18, 1000000] B")
            }
            PayloadSize::LogNormal { mean, stddev } if !(mean > 0.0 && stddev >= 0.0) => {
                bad("log-normal sizes need mean > 0 and stddev >= 0")
            }
            PayloadSize::UniformFrame { min_frame, max_frame }
                if !(MIN_FRAME_BYTES <= min_frame && min_frame <= max_frame && max_frame <= MAX_FRAME_BYTES) =>
            {
                bad("uniform frame sizes must satisfy 64 <= min <= max <= 1522")
            }
            _ => Ok(()),
        }
    }

    /// Expected link-layer bit rate (frame bytes, no preamble/gap), when it
    /// can be stated in closed form.
    pub fn nominal_bitrate_bps(&self) -> Option<f64> {
        let mean_frame_bytes = match self.payload {
            PayloadSize::Fixed { bytes } => fragment(bytes).iter().map(|&p| on_wire_bytes(p) as f64).sum(),
            PayloadSize::UniformFrame { min_frame, max_frame } => (min_frame + max_frame) as f64 / 2.0,
            _ => return None,
        };
        let gap = match self.periodicity {
            Periodicity::Cyclic { cycle_ns } => cycle_ns,
            Periodicity::Acyclic { mean_gap_ns } => mean_gap_ns,
            Periodicity::Trace { .. } => return None,
        };
        Some(mean_frame_bytes * 8.0 * NS_PER_S as f64 / gap as f64)
    }
}

/// One frame's worth of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emission {
    pub emit_ns: u64,
    pub payload_bytes: u32,
    pub on_wire_bytes: u32,
}

#[cfg(test)]
impl Emission {
    fn payload(emit_ns: u64, payload_bytes: u32) -> Self {
        Emission {
            emit_ns,
            payload_bytes,
            on_wire_bytes: on_wire_bytes(payload_bytes),
        }
    }
}

enum Sizer {
    Fixed(u32),
    LogNormal(LogNormal<f64>),
    Uniform(u32, u32),
    Trace,
}

impl Sizer {
    fn new(p: &PayloadSize) -> Self {
        match *p {
            PayloadSize::Fixed { bytes } => Sizer::Fixed(bytes),
            PayloadSize::LogNormal { mean, stddev } => {
                let (mu, sigma) = PayloadSize::lognormal_params(mean, stddev);
                Sizer::LogNormal(LogNormal::new(mu, sigma).expect("valid log-normal"))
            }
            PayloadSize::UniformFrame { min_frame, max_frame } => Sizer::Uniform(min_frame, max_frame),
            PayloadSize::FromTrace => Sizer::Trace,
        }
    }

    fn burst(&self, rng: &mut SimRng, out: &mut Vec<(u32, u32)>) {
        match self {
            Sizer::Fixed(b) => out.extend(fragment(*b).into_iter().map(|p| (p, on_wire_bytes(p)))),
            Sizer::LogNormal(d) => {
                let b = loop {
                    let x = d.sample(rng).round();
                    if (f64::from(MIN_APP_BYTES)..=f64::from(MAX_APP_BYTES)).contains(&x) {
                        break x as u32;
                    }
                };
                out.extend(fragment(b).into_iter().map(|p| (p, on_wire_bytes(p))));
            }
            Sizer::Uniform(lo, hi) => {
                let w = rng.random_range(*lo..=*hi);
                out.push((w.saturating_sub(FRAME_OVERHEAD_BYTES), w));
            }
            Sizer::Trace => unreachable!("trace sizes come from rows"),
        }
    }
}

/// Lazy emission schedule of one stream over `[0, duration)` (nominal times).
pub struct ScheduleIter<'a> {
    spec: &'a StreamSpec,
    duration_ns: u64,
    rng: SimRng,
    sizer: Sizer,
    jitter: Jitter,
    exp: Option<Exp<f64>>,
    k: u64,
    next_nominal: f64,
    pending: Vec<(u32, u32)>,
    pending_at: u64,
}

impl<'a> ScheduleIter<'a> {
    pub fn new(spec: &'a StreamSpec, duration_ns: u64, rng: SimRng) -> Self {
        let exp = match spec.periodicity {
            Periodicity::Acyclic { mean_gap_ns } => Some(Exp::new(1.0 / mean_gap_ns as f64).expect("positive rate")),
            _ => None,
        };
        ScheduleIter {
            spec,
            duration_ns,
            rng,
            sizer: Sizer::new(&spec.payload),
            jitter: Jitter::new(spec.jitter),
            exp,
            k: 0,
            next_nominal: spec.start_offset_ns as f64,
            pending: Vec::new(),
            pending_at: 0,
        }
    }

    fn next_burst(&mut self) -> bool {
        let nominal = match &self.spec.periodicity {
            Periodicity::Cyclic { cycle_ns } => self.spec.start_offset_ns + self.k * cycle_ns,
            Periodicity::Acyclic { .. } => {
                let gap = self.exp.as_ref().expect("acyclic").sample(&mut self.rng);
                self.next_nominal += gap;
                self.next_nominal.round() as u64
            }
            Periodicity::Trace { rows } => match rows.get(self.k as usize) {
                Some(r) => {
                    let t = self.spec.start_offset_ns + r.offset_ns;
                    if t >= self.duration_ns {
                        return false;
                    }
                    self.k += 1;
                    self.pending_at = self.jitter.apply(t, &mut self.rng);
                    self.pending.extend(
                        fragment(r.payload_bytes.max(1))
                            .into_iter()
                            .rev()
                            .map(|p| (p, on_wire_bytes(p))),
                    );
                    return true;
                }
                None => return false,
            },
        };
        if nominal >= self.duration_ns {
            return false;
        }
        self.k += 1;
        self.pending_at = self.jitter.apply(nominal, &mut self.rng);
        self.sizer.burst(&mut self.rng, &mut self.pending);
        self.pending.reverse();
        true
    }
}

impl Iterator for ScheduleIter<'_> {
    type Item = Emission;

    fn next(&mut self) -> Option<Emission> {
        if self.pending.is_empty() && !self.next_burst() {
            return None;
        }
        let (payload_bytes, on_wire_bytes) = self.pending.pop()?;
        Some(Emission {
            emit_ns: self.pending_at,
            payload_bytes,
            on_wire_bytes,
        })
    }
}

/// Emission schedule of `spec` for nominal instants in `[0, duration_ns)`.
pub fn generate_schedule(spec: &StreamSpec, duration_ns: u64, rng: SimRng) -> Vec<Emission> {
    assert!(duration_ns > 0, "duration must be positive");
    ScheduleIter::new(spec, duration_ns, rng).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamSetId {
    Theta,
    Psi,
    Omega,
}

impl FromStr for StreamSetId {
    type Err = TrafficError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "theta" | "θ" => Ok(StreamSetId::Theta),
            "psi" | "ψ" => Ok(StreamSetId::Psi),
            "omega" | "ω" => Ok(StreamSetId::Omega),
            _ => Err(TrafficError::UnknownStreamSet(s.to_string())),
        }
    }
}

impl fmt::Display for StreamSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamSetId::Theta => "theta",
            StreamSetId::Psi => "psi",
            StreamSetId::Omega => "omega",
        })
    }
}

/// Mean gap for an acyclic stream of single-frame bursts hitting `bitrate_bps`
/// at the link layer.
fn acyclic_gap_ns(mean_payload: f64, bitrate_bps: f64) -> u64 {
    ((mean_payload + f64::from(FRAME_OVERHEAD_BYTES)) * 8.0 * NS_PER_S as f64 / bitrate_bps).round() as u64
}

/// The three priority streams (PCP 6, 5, 4) of a predefined set.
pub fn build_stream_set(id: StreamSetId) -> Vec<StreamSpec> {
    let lognormal = |mean, stddev| PayloadSize::LogNormal { mean, stddev };
    let fixed = |bytes| PayloadSize::Fixed { bytes };
    match id {
        StreamSetId::Theta => vec![
            StreamSpec::cyclic("theta-high", 6, 200_000, fixed(1472)),
            StreamSpec::cyclic("theta-medium", 5, 300_000, fixed(1472)),
            StreamSpec::cyclic("theta-low", 4, 500_000, fixed(1472)),
        ],
        StreamSetId::Psi => vec![
            StreamSpec::cyclic("psi-tactile", 6, 1_000_000, fixed(82)),
            StreamSpec::cyclic("psi-audio", 5, 24_000_000, fixed(480)),
            StreamSpec::cyclic("psi-video", 4, 16_670_000, lognormal(8336.4, 24283.8)),
        ],
        StreamSetId::Omega => vec![
            StreamSpec::acyclic("omega-high", 6, acyclic_gap_ns(501.6, 175e3), lognormal(501.6, 984.4)),
            StreamSpec::cyclic("omega-medium", 5, 20_000_000, lognormal(153.9, 46.6)),
            StreamSpec::cyclic("omega-low", 4, 25_000_000, lognormal(62412.5, 60355.9)),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CrossSize {
    /// Every frame carries this payload (1472 B gives full 1522 B frames).
    Fixed {
        payload_bytes: u32,
    },
    UniformFrame {
        min_frame: u32,
        max_frame: u32,
    },
}

impl CrossSize {
    fn mean_wire_bytes(&self) -> f64 {
        match *self {
            CrossSize::Fixed { payload_bytes } => f64::from(on_wire_bytes(payload_bytes)),
            CrossSize::UniformFrame { min_frame, max_frame } => f64::from(min_frame + max_frame) / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossTrafficSpec {
    /// Offered load summed over all links, counting preamble and gap.
    pub rate_bps: u64,
    pub size: CrossSize,
    pub links: u32,
}

impl Default for CrossTrafficSpec {
    fn default() -> Self {
        CrossTrafficSpec {
            rate_bps: 2 * GIGABIT,
            size: CrossSize::Fixed {
                payload_bytes: MAX_PAYLOAD_BYTES,
            },
            links: 2,
        }
    }
}

impl CrossTrafficSpec {
    /// Mean inter-arrival gap on each link.
    pub fn mean_gap_ns(&self) -> f64 {
        let per_link = self.rate_bps as f64 / f64::from(self.links.max(1));
        (self.size.mean_wire_bytes() + f64::from(WIRE_OVERHEAD_BYTES)) * 8.0 * NS_PER_S as f64 / per_link
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossEmission {
    pub emit_ns: u64,
    pub on_wire_bytes: u32,
    pub link: u32,
}

/// Poisson arrivals on a single cross-traffic link, starting at `start_ns`.
pub struct PoissonLink {
    spec: CrossTrafficSpec,
    link: u32,
    exp: Exp<f64>,
    t: f64,
    end_ns: u64,
    rng: SimRng,
}

impl PoissonLink {
    pub fn new(spec: CrossTrafficSpec, link: u32, start_ns: u64, end_ns: u64, rng: SimRng) -> Option<Self> {
        if spec.rate_bps == 0 || spec.links == 0 {
            return None;
        }
        Some(PoissonLink {
            spec,
            link,
            exp: Exp::new(1.0 / spec.mean_gap_ns()).expect("positive rate"),
            t: start_ns as f64,
            end_ns,
            rng,
        })
    }
}

impl Iterator for PoissonLink {
    type Item = CrossEmission;

    fn next(&mut self) -> Option<CrossEmission> {
        self.t += self.exp.sample(&mut self.rng);
        let emit_ns = self.t.round() as u64;
        if emit_ns >= self.end_ns {
            return None;
        }
        let on_wire_bytes = match self.spec.size {
            CrossSize::Fixed { payload_bytes } => on_wire_bytes(payload_bytes),
            CrossSize::UniformFrame { min_frame, max_frame } => self.rng.random_range(min_frame..=max_frame),
        };
        Some(CrossEmission {
            emit_ns,
            on_wire_bytes,
            link: self.link,
        })
    }
}

/// All cross-traffic arrivals in `[0, duration_ns)`, merged across links in
/// time order. Link `i` draws from the named stream `cross-<i>`.
pub fn poisson_cross_traffic(spec: &CrossTrafficSpec, duration_ns: u64, seed: u64) -> Vec<CrossEmission> {
    let mut all: Vec<CrossEmission> = (0..spec.links)
        .filter_map(|l| {
            let rng = crate::simcore::stream_rng(seed, &format!("cross-{l}"));
            PoissonLink::new(*spec, l, 0, duration_ns, rng)
        })
        .flatten()
        .collect();
    all.sort_by_key(|e| (e.emit_ns, e.link));
    all
}

/// Reads a CSV trace of `offset_ns,payload_bytes` rows. Lines starting with
/// `#` and a non-numeric header row are ignored.
pub fn load_trace(path: &Path) -> Result<StreamSpec, TrafficError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| TrafficError::TraceIo {
        path: shown.clone(),
        source,
    })?;
    let rows = parse_trace(&text, &shown)?;
    if rows.is_empty() {
        log::warn!("trace {shown} is empty");
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".to_string());
    Ok(StreamSpec {
        name,
        pcp: 6,
        periodicity: Periodicity::Trace { rows },
        payload: PayloadSize::FromTrace,
        start_offset_ns: 0,
        jitter: JitterProfile::IDEAL,
    })
}

pub fn parse_trace(text: &str, path: &str) -> Result<Vec<TraceRow>, TrafficError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<TraceRow> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let err = |line: u64, reason: String| TrafficError::TraceParse {
            path: path.to_string(),
            line,
            reason,
        };
        let rec = rec.map_err(|e| err(i as u64 + 1, e.to_string()))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if rec.len() != 2 {
            return Err(err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let offset = rec[0].parse::<u64>();
        let size = rec[1].parse::<u32>();
        let (offset_ns, payload_bytes) = match (offset, size) {
            (Ok(o), Ok(s)) => (o, s),
            _ if i == 0 && rows.is_empty() && rec[0].parse::<f64>().is_err() => continue,
            (Err(e), _) => return Err(err(line, format!("offset `{}`: {e}", &rec[0]))),
            (_, Err(e)) => return Err(err(line, format!("payload `{}`: {e}", &rec[1]))),
        };
        if rows.last().is_some_and(|r| r.offset_ns > offset_ns) {
            return Err(TrafficError::TraceOutOfOrder {
                path: path.to_string(),
                line,
            });
        }
        rows.push(TraceRow {
            offset_ns,
            payload_bytes,
        });
    }
    Ok(rows)
}

/// Link-layer bit rate of a schedule over `duration_ns`.
pub fn schedule_bitrate_bps(schedule: &[Emission], duration_ns: u64) -> f64 {
    let bytes: u64 = schedule.iter().map(|e| u64::from(e.on_wire_bytes)).sum();
    bytes as f64 * 8.0 * NS_PER_S as f64 / duration_ns as f64
}

//! The switch under test: gate control lists, eight-queue egress ports with
//! transmission selection, cut-through eligibility and tail-drop buffering.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::{Scheduler, SimTime, NS_PER_S};
use crate::traffic::{serialization_time, Frame, GIGABIT};

pub const NUM_QUEUES: usize = 8;
pub const DEFAULT_CUT_THROUGH_BYTES: u32 = 337;
pub const DEFAULT_PROCESSING_NS: u64 = 2190;
pub const DEFAULT_SHARED_BUFFER_BYTES: u32 = 18_000;
pub const DEFAULT_QUEUE_LIMIT_BYTES: u32 = 12_000;
pub const GCL_UNIT_NS: u64 = 15_000;

/// Queue assignment used by the GCL templates.
pub const QUEUE_HIGH: u8 = 6;
pub const QUEUE_MEDIUM: u8 = 5;
pub const QUEUE_LOW: u8 = 4;
pub const QUEUE_CROSS: u8 = 0;
pub const QUEUE_PTP: u8 = 7;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GclError {
    #[error("gate control list has no entries")]
    Empty,
    #[error("gate control list entry {0} has zero duration")]
    ZeroDuration(usize),
    #[error("invalid gate mask `{0}` (expected 8 characters of 0/1, leftmost is queue 7)")]
    BadMask(String),
    #[error("unknown GCL configuration {0} (expected 1 to 4)")]
    UnknownConfig(u8),
    #[error("configuration {0} keeps the high-priority gate open and takes no guard band")]
    GuardBandNotApplicable(u8),
    #[error("slot unit and slot multiplier must be positive")]
    ZeroSlot,
}

/// Bit `q` of the mask opens queue `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GclEntry {
    pub gate_mask: u8,
    pub duration_ns: u64,
}

/// Parses an 8-character gate string; the leftmost character is queue 7.
pub fn parse_mask(s: &str) -> Result<u8, GclError> {
    if s.len() != 8 || !s.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(GclError::BadMask(s.to_string()));
    }
    Ok(s.bytes().fold(0u8, |m, b| (m << 1) | (b - b'0')))
}

pub fn format_mask(mask: u8) -> String {
    format!("{mask:08b}")
}

fn mask_of(queues: &[u8]) -> u8 {
    queues.iter().fold(0u8, |m, q| m | (1 << q))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GclRaw")]
pub struct Gcl {
    entries: Vec<GclEntry>,
    base_time: SimTime,
    cycle_ns: u64,
    #[serde(skip)]
    starts: Vec<u64>,
}

#[derive(Deserialize)]
struct GclRaw {
    entries: Vec<GclEntry>,
    #[serde(default)]
    base_time: SimTime,
}

impl TryFrom<GclRaw> for Gcl {
    type Error = GclError;

    fn try_from(raw: GclRaw) -> Result<Self, GclError> {
        Gcl::new(raw.entries, raw.base_time)
    }
}

impl Gcl {
    pub fn new(entries: Vec<GclEntry>, base_time: SimTime) -> Result<Self, GclError> {
        if entries.is_empty() {
            return Err(GclError::Empty);
        }
        if let Some(i) = entries.iter().position(|e| e.duration_ns == 0) {
            return Err(GclError::ZeroDuration(i));
        }
        let mut starts = Vec::with_capacity(entries.len());
        let mut acc = 0u64;
        for e in &entries {
            starts.push(acc);
            acc += e.duration_ns;
        }
        Ok(Gcl {
            entries,
            base_time,
            cycle_ns: acc,
            starts,
        })
    }

    /// Builds a GCL from `(mask string, duration)` pairs.
    pub fn from_strings(rows: &[(&str, u64)], base_time: SimTime) -> Result<Self, GclError> {
        let entries = rows
            .iter()
            .map(|(m, d)| {
                Ok(GclEntry {
                    gate_mask: parse_mask(m)?,
                    duration_ns: *d,
                })
            })
            .collect::<Result<Vec<_>, GclError>>()?;
        Gcl::new(entries, base_time)
    }

    /// A single always-open entry.
    pub fn always_open(cycle_ns: u64) -> Self {
        Gcl::new(
            vec![GclEntry {
                gate_mask: 0xff,
                duration_ns: cycle_ns,
            }],
            SimTime::ZERO,
        )
        .expect("valid")
    }

    pub fn entries(&self) -> &[GclEntry] {
        &self.entries
    }

    pub fn cycle_ns(&self) -> u64 {
        self.cycle_ns
    }

    pub fn base_time(&self) -> SimTime {
        self.base_time
    }

    /// Offset of `t` within the cycle; instants before the base time wrap.
    pub fn offset_in_cycle(&self, t: SimTime) -> u64 {
        (i128::from(t.ns()) - i128::from(self.base_time.ns())).rem_euclid(i128::from(self.cycle_ns)) as u64
    }

    fn locate(&self, t: SimTime) -> (usize, u64) {
        let off = self.offset_in_cycle(t);
        let idx = self.starts.partition_point(|&s| s <= off) - 1;
        (idx, off)
    }

    pub fn entry_index(&self, t: SimTime) -> usize {
        self.locate(t).0
    }

    pub fn gate_state(&self, t: SimTime) -> u8 {
        self.entries[self.entry_index(t)].gate_mask
    }

    pub fn is_open(&self, queue: u8, t: SimTime) -> bool {
        self.gate_state(t) & (1 << queue) != 0
    }

    /// Next entry boundary strictly after `t`.
    pub fn next_change(&self, t: SimTime) -> SimTime {
        let (idx, off) = self.locate(t);
        t + (self.starts[idx] + self.entries[idx].duration_ns - off)
    }

    /// Earliest instant at or after `t` at which `queue`'s gate is open.
    pub fn next_open(&self, queue: u8, t: SimTime) -> Option<SimTime> {
        let (idx, off) = self.locate(t);
        if self.entries[idx].gate_mask & (1 << queue) != 0 {
            return Some(t);
        }
        let n = self.entries.len();
        let mut ahead = self.starts[idx] + self.entries[idx].duration_ns - off;
        for k in 1..=n {
            let e = &self.entries[(idx + k) % n];
            if e.gate_mask & (1 << queue) != 0 {
                return Some(t + ahead);
            }
            ahead += e.duration_ns;
        }
        None
    }

    /// End of the open run containing `t` for `queue`. `None` if the gate is
    /// closed at `t` or never closes.
    pub fn open_until(&self, queue: u8, t: SimTime) -> Option<SimTime> {
        let (idx, off) = self.locate(t);
        if self.entries[idx].gate_mask & (1 << queue) == 0 {
            return None;
        }
        let n = self.entries.len();
        let mut ahead = self.starts[idx] + self.entries[idx].duration_ns - off;
        for k in 1..=n {
            let e = &self.entries[(idx + k) % n];
            if e.gate_mask & (1 << queue) == 0 {
                return Some(t + ahead);
            }
            ahead += e.duration_ns;
        }
        None
    }

    /// Open intervals of `queue` as `[start, end)` offsets within one cycle,
    /// with adjacent entries merged.
    pub fn open_windows(&self, queue: u8) -> Vec<(u64, u64)> {
        let mut out: Vec<(u64, u64)> = Vec::new();
        for (e, &s) in self.entries.iter().zip(&self.starts) {
            if e.gate_mask & (1 << queue) == 0 {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.1 == s => last.1 = s + e.duration_ns,
                _ => out.push((s, s + e.duration_ns)),
            }
        }
        out
    }
}

/// Named GCL layout: one of four templates with a time unit, a data-slot
/// multiplier and an optional guard band of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GclTemplate {
    pub config: u8,
    #[serde(default = "default_unit")]
    pub unit_ns: u64,
    #[serde(default = "one")]
    pub slot_units: u64,
    #[serde(default)]
    pub guard_band: bool,
}

fn default_unit() -> u64 {
    GCL_UNIT_NS
}

fn one() -> u64 {
    1
}

impl GclTemplate {
    /// Queues open in each data slot, before queue 7 is added.
    fn data_slots(config: u8) -> Result<Vec<Vec<u8>>, GclError> {
        let (h, m, l, x) = (QUEUE_HIGH, QUEUE_MEDIUM, QUEUE_LOW, QUEUE_CROSS);
        Ok(match config {
            1 => vec![vec![h], vec![m], vec![l], vec![x]],
            2 => vec![vec![h], vec![h, m], vec![h, l], vec![h, x]],
            3 => vec![vec![h], vec![h, m], vec![h, m, l], vec![h, m, l, x]],
            4 => vec![vec![h], vec![m], vec![h, l], vec![m, x], vec![h, l], vec![m], vec![h]],
            other => return Err(GclError::UnknownConfig(other)),
        })
    }

    pub fn build(&self, base_time: SimTime) -> Result<Gcl, GclError> {
        if self.unit_ns == 0 || self.slot_units == 0 {
            return Err(GclError::ZeroSlot);
        }
        let slots = Self::data_slots(self.config)?;
        if self.guard_band && matches!(self.config, 2 | 3) {
            return Err(GclError::GuardBandNotApplicable(self.config));
        }
        let ptp = 1u8 << QUEUE_PTP;
        let mut entries: Vec<GclEntry> = slots
            .iter()
            .map(|qs| GclEntry {
                gate_mask: mask_of(qs) | ptp,
                duration_ns: self.unit_ns * self.slot_units,
            })
            .collect();
        if self.guard_band {
            entries.push(GclEntry {
                gate_mask: ptp,
                duration_ns: self.unit_ns,
            });
        }
        Gcl::new(entries, base_time)
    }
}

/// Template GCL with one-unit data slots.
pub fn make_gcl(config: u8, slot_unit_ns: u64, guard_band: bool, base_time: SimTime) -> Result<Gcl, GclError> {
    GclTemplate {
        config,
        unit_ns: slot_unit_ns,
        slot_units: 1,
        guard_band,
    }
    .build(base_time)
}

/// Queue for a frame: the PCP, one to one.
pub fn classify(frame: &Frame) -> u8 {
    debug_assert!(frame.pcp < 8);
    frame.pcp
}

/// Instant the frame may be selected for egress: after `threshold` bytes
/// (or the whole frame, if shorter) have arrived plus the processing delay.
pub fn cut_through_eligible_time(
    frame: &Frame,
    arrival_first_bit: SimTime,
    ingress_rate_bps: u64,
    threshold_bytes: u32,
    processing_delay_ns: u64,
) -> SimTime {
    let bytes = u128::from(frame.on_wire_bytes.min(threshold_bytes));
    let rate = u128::from(ingress_rate_bps);
    let accumulate = ((bytes * 8 * u128::from(NS_PER_S) + rate / 2) / rate) as u64;
    arrival_first_bit + accumulate + processing_delay_ns
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// PCP ignored; one FIFO in arrival order.
    None,
    /// Strict priority.
    Spq,
    /// Strict priority among queues whose gate is open.
    Tas(Gcl),
}

impl Selection {
    pub fn name(&self) -> &'static str {
        match self {
            Selection::None => "none",
            Selection::Spq => "spq",
            Selection::Tas(_) => "tas",
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortConfig {
    pub link_rate_bps: u64,
    pub selection: Selection,
    pub shared_buffer_bytes: u32,
    /// Per-queue cap under `spq`/`tas`; `None` leaves only the shared pool.
    pub queue_limit_bytes: Option<u32>,
    pub cut_through_threshold_bytes: u32,
    pub processing_delay_ns: u64,
    /// Refuse to start a frame that would still be on the wire when its gate closes.
    pub strict_length_check: bool,
    pub log_departures: bool,
}

impl Default for PortConfig {
    fn default() -> Self {
        PortConfig {
            link_rate_bps: GIGABIT,
            selection: Selection::None,
            shared_buffer_bytes: DEFAULT_SHARED_BUFFER_BYTES,
            queue_limit_bytes: Some(DEFAULT_QUEUE_LIMIT_BYTES),
            cut_through_threshold_bytes: DEFAULT_CUT_THROUGH_BYTES,
            processing_delay_ns: DEFAULT_PROCESSING_NS,
            strict_length_check: false,
            log_departures: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Queued {
    frame: Frame,
    arrival_seq: u64,
    enqueued_at: SimTime,
}

/// One transmission on the egress wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Departure {
    pub queue: u8,
    pub stream: u32,
    pub seq: u64,
    pub enqueued_ns: u64,
    pub start_ns: u64,
    pub end_ns: u64,
    /// Queues holding frames at the selection instant, including the chosen one.
    pub waiting_mask: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectResult {
    Transmit {
        frame: Frame,
        start: SimTime,
        end: SimTime,
    },
    /// Nothing eligible; re-run selection at this time (if any frame waits).
    IdleUntil(Option<SimTime>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortCounters {
    pub enqueued: u64,
    pub dropped: [u64; NUM_QUEUES],
    pub transmitted: u64,
}

impl PortCounters {
    pub fn total_dropped(&self) -> u64 {
        self.dropped.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct EgressPort {
    pub config: PortConfig,
    queues: [VecDeque<Queued>; NUM_QUEUES],
    queue_bytes: [u32; NUM_QUEUES],
    buffered_bytes: u32,
    busy_until: SimTime,
    arrivals: u64,
    pub counters: PortCounters,
    pub departures: Vec<Departure>,
}

impl EgressPort {
    pub fn new(config: PortConfig) -> Self {
        EgressPort {
            config,
            queues: Default::default(),
            queue_bytes: [0; NUM_QUEUES],
            buffered_bytes: 0,
            busy_until: SimTime::ZERO,
            arrivals: 0,
            counters: PortCounters::default(),
            departures: Vec::new(),
        }
    }

    pub fn busy_until(&self) -> SimTime {
        self.busy_until
    }

    pub fn buffered_bytes(&self) -> u32 {
        self.buffered_bytes
    }

    pub fn queued_frames(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn queue_len(&self, q: u8) -> usize {
        self.queues[q as usize].len()
    }

    fn waiting_mask(&self) -> u8 {
        (0..NUM_QUEUES)
            .filter(|&q| !self.queues[q].is_empty())
            .fold(0, |m, q| m | (1 << q))
    }

    /// Adds an eligible frame to its queue or tail-drops it.
    pub fn enqueue(&mut self, frame: Frame, t: SimTime) -> EnqueueOutcome {
        let q = classify(&frame) as usize;
        let size = frame.on_wire_bytes;
        let over_pool = self.buffered_bytes + size > self.config.shared_buffer_bytes;
        let over_queue = match (self.config.selection != Selection::None, self.config.queue_limit_bytes) {
            (true, Some(limit)) => self.queue_bytes[q] + size > limit,
            _ => false,
        };
        if over_pool || over_queue {
            self.counters.dropped[q] += 1;
            return EnqueueOutcome::Dropped;
        }
        self.buffered_bytes += size;
        self.queue_bytes[q] += size;
        self.queues[q].push_back(Queued {
            frame,
            arrival_seq: self.arrivals,
            enqueued_at: t,
        });
        self.arrivals += 1;
        self.counters.enqueued += 1;
        EnqueueOutcome::Accepted
    }

    fn pick(&self, t: SimTime) -> Option<usize> {
        match &self.config.selection {
            Selection::None => (0..NUM_QUEUES)
                .filter_map(|q| self.queues[q].front().map(|f| (f.arrival_seq, q)))
                .min()
                .map(|(_, q)| q),
            Selection::Spq => (0..NUM_QUEUES).rev().find(|&q| !self.queues[q].is_empty()),
            Selection::Tas(gcl) => {
                let mask = gcl.gate_state(t);
                (0..NUM_QUEUES).rev().find(|&q| {
                    let Some(head) = self.queues[q].front() else {
                        return false;
                    };
                    if mask & (1 << q) == 0 {
                        return false;
                    }
                    if self.config.strict_length_check {
                        let end = t + serialization_time(head.frame.on_wire_bytes, self.config.link_rate_bps);
                        if let Some(close) = gcl.open_until(q as u8, t) {
                            return end <= close;
                        }
                    }
                    true
                })
            }
        }
    }

    /// Transmission selection at `t` (the port must be idle).
    pub fn select_next(&mut self, t: SimTime) -> SelectResult {
        assert!(t >= self.busy_until, "selection while the port is busy");
        let Some(q) = self.pick(t) else {
            if self.queued_frames() == 0 {
                return SelectResult::IdleUntil(None);
            }
            let wake = match &self.config.selection {
                Selection::Tas(gcl) => gcl.next_change(t),
                _ => unreachable!("frames waiting under a work-conserving policy"),
            };
            return SelectResult::IdleUntil(Some(wake));
        };
        let waiting_mask = self.waiting_mask();
        let item = self.queues[q].pop_front().expect("picked non-empty queue");
        let size = item.frame.on_wire_bytes;
        self.buffered_bytes -= size;
        self.queue_bytes[q] -= size;
        let end = t + serialization_time(size, self.config.link_rate_bps);
        self.busy_until = end;
        self.counters.transmitted += 1;
        if self.config.log_departures {
            self.departures.push(Departure {
                queue: q as u8,
                stream: item.frame.stream,
                seq: item.frame.seq,
                enqueued_ns: item.enqueued_at.ns(),
                start_ns: t.ns(),
                end_ns: end.ns(),
                waiting_mask,
            });
        }
        SelectResult::Transmit {
            frame: item.frame,
            start: t,
            end,
        }
    }
}

impl FromStr for Selection {
    type Err = String;

    /// `none` or `spq`; TAS needs a GCL and is built from config.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Selection::None),
            "spq" => Ok(Selection::Spq),
            other => Err(format!("selection `{other}` needs a GCL or is unknown")),
        }
    }
}

#[derive(Debug)]
enum PortEvent {
    Arrive(usize),
    Select,
}

/// Feeds `(eligible_time, frame)` pairs through a single port using the event
/// scheduler and returns the departure log. Used for small replayable cases.
pub fn run_port(config: PortConfig, arrivals: &[(SimTime, Frame)]) -> Vec<Departure> {
    let mut port = EgressPort::new(PortConfig {
        log_departures: true,
        ..config
    });
    let mut sched: Scheduler<PortEvent> = Scheduler::new();
    for (i, (t, _)) in arrivals.iter().enumerate() {
        sched.schedule(*t, PortEvent::Arrive(i)).expect("future arrival");
    }
    while let Some((now, ev)) = sched.pop_due(SimTime(u64::MAX)) {
        if let PortEvent::Arrive(i) = ev {
            port.enqueue(arrivals[i].1, now);
        }
        // Selection runs once every same-instant arrival has been enqueued.
        if sched.peek_time() == Some(now) || now < port.busy_until() {
            continue;
        }
        match port.select_next(now) {
            SelectResult::Transmit { end, .. } => {
                sched.schedule(end, PortEvent::Select).expect("future");
            }
            SelectResult::IdleUntil(Some(wake)) => {
                sched.schedule(wake, PortEvent::Select).expect("future");
            }
            SelectResult::IdleUntil(None) => {}
        }
    }
    port.departures
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(stream: u32, seq: u64, pcp: u8, wire: u32) -> Frame {
        Frame::with_wire_size(stream, seq, pcp, wire, 0)
    }

    #[test]
    fn classify_is_identity() {
        for pcp in [0, 6, 7] {
            assert_eq!(classify(&frame(0, 0, pcp, 100)), pcp);
        }
    }

    #[test]
    fn cut_through_eligibility() {
        let f64b = frame(0, 0, 6, 64);
        assert_eq!(
            cut_through_eligible_time(&f64b, SimTime(1000), GIGABIT, 337, 2190),
            SimTime(1000 + 512 + 2190)
        );
        let f337 = frame(0, 0, 6, 337);
        assert_eq!(
            cut_through_eligible_time(&f337, SimTime(0), GIGABIT, 337, 2190),
            SimTime(2696 + 2190)
        );
        let f1522 = frame(0, 0, 6, 1522);
        assert_eq!(
            cut_through_eligible_time(&f1522, SimTime(0), GIGABIT, 337, 2190),
            cut_through_eligible_time(&f337, SimTime(0), GIGABIT, 337, 2190)
        );
    }

    #[test]
    fn mask_strings_put_queue_seven_first() {
        assert_eq!(parse_mask("10000000").unwrap(), 0x80);
        assert_eq!(parse_mask("00000001").unwrap(), 0x01);
        assert_eq!(format_mask(0b1100_0000), "11000000");
        assert!(parse_mask("1000000").is_err());
        assert!(parse_mask("1000000x").is_err());
    }

    #[test]
    fn gcl_rejects_empty_and_zero_duration() {
        assert_eq!(Gcl::new(vec![], SimTime::ZERO), Err(GclError::Empty));
        let e = GclEntry {
            gate_mask: 1,
            duration_ns: 0,
        };
        assert_eq!(Gcl::new(vec![e], SimTime::ZERO), Err(GclError::ZeroDuration(0)));
    }

    #[test]
    fn gate_state_wraps() {
        let g = make_gcl(1, GCL_UNIT_NS, true, SimTime(1000)).unwrap();
        let first = g.entries()[0].gate_mask;
        assert_eq!(g.gate_state(SimTime(1000)), first);
        assert_eq!(g.gate_state(SimTime(1000 + g.cycle_ns())), first);
        // Before the base time the schedule runs backwards by whole cycles.
        assert_eq!(g.gate_state(SimTime(999)), g.entries()[4].gate_mask);
    }

    #[test]
    fn gcl1_second_slot_opens_medium() {
        let g = make_gcl(1, 15_000, false, SimTime::ZERO).unwrap();
        let m = g.gate_state(SimTime(16_000));
        assert_ne!(m & (1 << QUEUE_MEDIUM), 0);
        assert_eq!(m & (1 << QUEUE_HIGH), 0);
    }

    #[test]
    fn templates_match_tables() {
        let g1 = make_gcl(1, 15_000, true, SimTime::ZERO).unwrap();
        assert_eq!(g1.entries().len(), 5);
        assert_eq!(g1.cycle_ns(), 75_000);
        let masks: Vec<_> = g1.entries().iter().map(|e| format_mask(e.gate_mask)).collect();
        assert_eq!(masks, ["11000000", "10100000", "10010000", "10000001", "10000000"]);

        let g2 = make_gcl(2, 15_000, false, SimTime::ZERO).unwrap();
        assert_eq!(g2.entries().len(), 4);
        assert_eq!(g2.cycle_ns(), 60_000);
        assert!(g2.entries().iter().all(|e| e.gate_mask & (1 << QUEUE_HIGH) != 0));

        let g3 = make_gcl(3, 15_000, false, SimTime::ZERO).unwrap();
        let masks: Vec<_> = g3.entries().iter().map(|e| format_mask(e.gate_mask)).collect();
        assert_eq!(masks, ["11000000", "11100000", "11110000", "11110001"]);

        let g4 = make_gcl(4, 15_000, true, SimTime::ZERO).unwrap();
        assert_eq!(g4.entries().len(), 8);
        assert_eq!(g4.cycle_ns(), 120_000);
        let high: Vec<_> = (0..8)
            .filter(|&i| g4.entries()[i].gate_mask & (1 << QUEUE_HIGH) != 0)
            .collect();
        assert_eq!(high, [0, 2, 4, 6]);
        assert_eq!(g4.entries()[7].gate_mask, 1 << QUEUE_PTP);
    }

    #[test]
    fn guard_band_is_one_unit_regardless_of_slot() {
        let g = GclTemplate {
            config: 4,
            unit_ns: 15_000,
            slot_units: 3,
            guard_band: true,
        }
        .build(SimTime::ZERO)
        .unwrap();
        assert_eq!(g.cycle_ns(), 7 * 45_000 + 15_000);
        assert_eq!(g.entries()[7].duration_ns, 15_000);
    }

    #[test]
    fn guard_band_rejected_for_configs_two_and_three() {
        for c in [2, 3] {
            assert_eq!(
                make_gcl(c, 15_000, true, SimTime::ZERO),
                Err(GclError::GuardBandNotApplicable(c))
            );
        }
        assert_eq!(
            make_gcl(5, 15_000, false, SimTime::ZERO),
            Err(GclError::UnknownConfig(5))
        );
    }

    #[test]
    fn gcl_json_round_trip() {
        let g = make_gcl(4, 15_000, true, SimTime(7)).unwrap();
        let back: Gcl = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.gate_state(SimTime(40_000)), g.gate_state(SimTime(40_000)));
    }

    #[test]
    fn next_open_and_open_until() {
        let g = make_gcl(1, 15_000, true, SimTime::ZERO).unwrap();
        assert_eq!(g.next_open(QUEUE_HIGH, SimTime(5)), Some(SimTime(5)));
        assert_eq!(g.next_open(QUEUE_HIGH, SimTime(15_000)), Some(SimTime(75_000)));
        assert_eq!(g.next_open(QUEUE_LOW, SimTime(0)), Some(SimTime(30_000)));
        assert_eq!(g.next_open(3, SimTime(0)), None);
        assert_eq!(g.open_until(QUEUE_HIGH, SimTime(100)), Some(SimTime(15_000)));
        assert_eq!(g.open_until(QUEUE_PTP, SimTime(100)), None);
        assert_eq!(g.open_until(QUEUE_LOW, SimTime(100)), None);
        assert_eq!(g.next_change(SimTime(100)), SimTime(15_000));
    }

    #[test]
    fn open_windows_merge_adjacent_entries() {
        let g = make_gcl(3, 15_000, false, SimTime::ZERO).unwrap();
        assert_eq!(g.open_windows(QUEUE_MEDIUM), [(15_000, 60_000)]);
        let g4 = make_gcl(4, 15_000, true, SimTime::ZERO).unwrap();
        assert_eq!(g4.open_windows(QUEUE_HIGH).len(), 4);
    }

    fn port(sel: Selection) -> EgressPort {
        EgressPort::new(PortConfig {
            selection: sel,
            log_departures: true,
            ..Default::default()
        })
    }

    #[test]
    fn enqueue_boundaries() {
        let mut p = EgressPort::new(PortConfig {
            shared_buffer_bytes: 3044,
            queue_limit_bytes: None,
            ..Default::default()
        });
        assert_eq!(p.enqueue(frame(0, 0, 0, 1522), SimTime(0)), EnqueueOutcome::Accepted);
        // Exactly fills the remaining capacity.
        assert_eq!(p.enqueue(frame(0, 1, 0, 1522), SimTime(0)), EnqueueOutcome::Accepted);
        assert_eq!(p.enqueue(frame(0, 2, 0, 64), SimTime(0)), EnqueueOutcome::Dropped);
        assert_eq!(p.counters.dropped[0], 1);
        assert_eq!(p.buffered_bytes(), 3044);
    }

    #[test]
    fn per_queue_limit_protects_other_queues() {
        let mut p = EgressPort::new(PortConfig {
            selection: Selection::Spq,
            queue_limit_bytes: Some(3044),
            ..Default::default()
        });
        for i in 0..5 {
            p.enqueue(frame(9, i, 0, 1522), SimTime(0));
        }
        assert_eq!(p.counters.dropped[0], 3);
        assert_eq!(p.enqueue(frame(1, 0, 6, 1522), SimTime(0)), EnqueueOutcome::Accepted);
    }

    #[test]
    fn spq_picks_highest_queue() {
        let mut p = port(Selection::Spq);
        p.enqueue(frame(2, 0, 4, 1522), SimTime(0));
        p.enqueue(frame(1, 0, 6, 1522), SimTime(0));
        match p.select_next(SimTime(0)) {
            SelectResult::Transmit { frame, end, .. } => {
                assert_eq!(frame.pcp, 6);
                assert_eq!(end, SimTime(12_336));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn none_selection_is_arrival_fifo() {
        let mut p = port(Selection::None);
        p.enqueue(frame(2, 0, 4, 100), SimTime(0));
        p.enqueue(frame(1, 0, 6, 100), SimTime(1));
        let SelectResult::Transmit { frame, .. } = p.select_next(SimTime(2)) else {
            panic!()
        };
        assert_eq!(frame.pcp, 4);
    }

    #[test]
    fn spq_blocking_is_bounded_by_one_frame() {
        let arrivals = [(SimTime(0), frame(9, 0, 0, 1522)), (SimTime(1), frame(1, 0, 6, 1522))];
        let d = run_port(
            PortConfig {
                selection: Selection::Spq,
                ..Default::default()
            },
            &arrivals,
        );
        assert_eq!(d[1].queue, 6);
        assert!(d[1].start_ns - 1 <= 12_336);
    }

    #[test]
    fn closed_gate_blocks_even_top_priority() {
        let g = make_gcl(1, 15_000, false, SimTime::ZERO).unwrap();
        let mut p = port(Selection::Tas(g));
        p.enqueue(frame(1, 0, 6, 1522), SimTime(16_000));
        assert_eq!(
            p.select_next(SimTime(16_000)),
            SelectResult::IdleUntil(Some(SimTime(30_000)))
        );
    }

    #[test]
    fn overrun_vs_strict_length_check() {
        let g = make_gcl(1, 15_000, false, SimTime::ZERO).unwrap();
        let late = (SimTime(14_000), frame(1, 0, 6, 1522));
        let overrun = run_port(
            PortConfig {
                selection: Selection::Tas(g.clone()),
                ..Default::default()
            },
            &[late],
        );
        assert_eq!(overrun[0].start_ns, 14_000);
        let strict = run_port(
            PortConfig {
                selection: Selection::Tas(g),
                strict_length_check: true,
                ..Default::default()
            },
            &[late],
        );
        assert_eq!(strict[0].start_ns, 60_000);
    }

    #[test]
    fn departures_never_overlap() {
        let arrivals: Vec<_> = (0..10)
            .map(|i| (SimTime(i * 100), frame(i as u32, i, (i % 8) as u8, 1522)))
            .collect();
        let d = run_port(
            PortConfig {
                selection: Selection::Spq,
                ..Default::default()
            },
            &arrivals,
        );
        assert_eq!(d.len(), 10);
        assert!(d.windows(2).all(|w| w[0].end_ns <= w[1].start_ns));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gate_state_is_periodic(config in 1u8..=4, gb: bool, slot in 1u64..4,
                                      base in 0u64..1_000_000, t in 0u64..10_000_000_000, k in 0u64..1000) {
                let gb = gb && matches!(config, 1 | 4);
                let g = GclTemplate { config, unit_ns: 15_000, slot_units: slot, guard_band: gb }
                    .build(SimTime(base)).unwrap();
                prop_assert_eq!(g.gate_state(SimTime(t)), g.gate_state(SimTime(t + k * g.cycle_ns())));
            }

            #[test]
            fn next_open_is_open_and_earliest(config in 1u8..=4, q in prop::sample::select(vec![0u8, 4, 5, 6, 7]),
                                              t in 0u64..1_000_000) {
                let g = make_gcl(config, 15_000, false, SimTime(0)).unwrap();
                let n = g.next_open(q, SimTime(t)).unwrap();
                prop_assert!(g.is_open(q, n));
                // Every entry boundary between t and n is closed for q.
                let mut probe = SimTime(t);
                while probe < n {
                    prop_assert!(!g.is_open(q, probe));
                    probe = g.next_change(probe);
                }
            }
        }
    }
}

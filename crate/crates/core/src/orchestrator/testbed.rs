//! The star-topology testbed as one event loop.
//!
//! Node layout: the sink, one sender per stream, and a cross-traffic node
//! with one link per configured cross link. The switch is the grandmaster;
//! every other node except the cross-traffic source runs a PTP slave whose
//! Sync and Delay_Req messages travel in-band on queue 7.
//!
//! Egress port `s` of the switch leads to slave `s`: port 0 is the sink port
//! (data, cross traffic and the sink's Sync messages), ports `1..=n` carry
//! only Sync messages to the senders.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::config::Resolved;
use crate::clocks::{DriftingClock, PtpPort, SyncTimestamps};
use crate::sender_tas::{derive_sender_schedule, SenderSchedule};
use crate::simcore::{stream_rng, Scheduler, SimRng, SimTime};
use crate::switch::{cut_through_eligible_time, Departure, EgressPort, EnqueueOutcome, SelectResult};
use crate::traffic::{
    serialization_time, CrossEmission, Emission, Frame, Periodicity, PoissonLink, ScheduleIter, StreamSpec, PCP_CROSS,
    PCP_PTP,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Stream ids at or above this value belong to cross-traffic links.
pub const CROSS_STREAM_BASE: u32 = 0x8000_0000;
/// Stream id carried by PTP event messages.
pub const PTP_STREAM: u32 = u32::MAX;
/// Grandmaster turnaround from Delay_Req reception to the slave's use of
/// the Delay_Resp.
const DELAY_RESP_NS: u64 = 10_000;
const PORT_SINK: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub stream: u32,
    pub seq: u64,
    /// Sender local time, first bit on the wire.
    pub tx_ts_ns: i64,
    /// Sink local time, first byte received.
    pub rx_ts_ns: i64,
    pub latency_ns: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationSample {
    pub true_ns: u64,
    pub slave_id: u32,
    pub deviation_ns: i64,
}

/// Frame accounting over every node and link of the testbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Conservation {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

impl Conservation {
    pub fn balanced(&self) -> bool {
        self.generated == self.delivered + self.dropped + self.in_flight
    }

    pub fn add(&mut self, o: &Conservation) {
        self.generated += o.generated;
        self.delivered += o.delivered;
        self.dropped += o.dropped;
        self.in_flight += o.in_flight;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StreamTally {
    pub sent: u64,
    pub switch_drops: u64,
    /// Hold-buffer overflow plus sender NIC overflow.
    pub sender_drops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CrossTally {
    pub sent: u64,
    pub switch_drops: u64,
    pub nic_drops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PtpTally {
    pub exchanges: u64,
    pub sync_timeouts: u64,
    pub anomalies: u64,
    pub frames_dropped: u64,
}

/// Everything one simulation attempt produced.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub seed: u64,
    pub records: Vec<Vec<MeasurementRecord>>,
    pub tallies: Vec<StreamTally>,
    pub cross: CrossTally,
    pub ptp: PtpTally,
    pub deviations: Vec<DeviationSample>,
    pub conservation: Conservation,
    /// Sink-port departure log (when enabled in the switch config).
    pub departures: Vec<Departure>,
    pub warmup_end_ns: u64,
    pub measurement_start_ns: u64,
    pub measurement_end_ns: u64,
    pub all_locked: bool,
}

impl Attempt {
    /// Largest |deviation| sampled after PTP warm-up.
    pub fn max_abs_deviation(&self) -> Option<i64> {
        self.deviations
            .iter()
            .filter(|d| d.true_ns >= self.warmup_end_ns)
            .map(|d| d.deviation_ns.abs())
            .max()
    }
}

#[derive(Debug)]
enum Ev {
    Emit(usize),
    Release(usize),
    Cross(usize),
    NicDone(usize),
    Eligible(usize, Frame),
    Select(usize),
    SyncTx(usize),
    DelayReq(usize, u64),
    ExchangeDone(usize, u64),
}

struct Source<'a> {
    spec: &'a StreamSpec,
    iter: ScheduleIter<'a>,
    next: Option<Emission>,
    base_local: i64,
    seq: u64,
    slave: usize,
    nic: usize,
    tas: Option<SenderSchedule>,
    release_armed: Option<SimTime>,
}

struct CrossSource {
    iter: PoissonLink,
    next: Option<CrossEmission>,
    nic: usize,
    link: u32,
    seq: u64,
}

struct Nic {
    queue: VecDeque<Frame>,
    busy: bool,
    cap: usize,
    /// Slave whose clock timestamps this NIC's transmissions.
    owner: Option<usize>,
}

struct Port {
    port: EgressPort,
    next_select: Option<SimTime>,
}

#[derive(Default)]
struct Exchange {
    seq: u64,
    t1: Option<i64>,
    t2: Option<i64>,
    t3: Option<i64>,
    t4: Option<i64>,
}

struct Slave {
    ptp: PtpPort,
    noise_rng: SimRng,
    nic: usize,
    exchange: Option<Exchange>,
    next_seq: u64,
}

struct Testbed<'a> {
    sched: Scheduler<Ev>,
    cfg: &'a Resolved,
    gm: DriftingClock,
    sources: Vec<Source<'a>>,
    cross: Vec<CrossSource>,
    nics: Vec<Nic>,
    ports: Vec<Port>,
    slaves: Vec<Slave>,
    sync_until: SimTime,
    ts_noise: Option<Normal<f64>>,
    in_transit: u64,
    out: Attempt,
}

fn slave_clock(cfg: &Resolved, seed: u64, name: &str) -> DriftingClock {
    let mut rng = stream_rng(seed, &format!("clock-{name}"));
    let drift_ppm = match cfg.ptp.slave_drift_ppm {
        Some(ppm) => ppm,
        None if cfg.ptp.max_drift_ppm > 0.0 => rng.random_range(-cfg.ptp.max_drift_ppm..=cfg.ptp.max_drift_ppm),
        None => 0.0,
    };
    let max_off = cfg.ptp.max_initial_offset_ns.max(0);
    let offset = if max_off > 0 {
        rng.random_range(-max_off..=max_off)
    } else {
        0
    };
    DriftingClock::new(offset, (drift_ppm * 1000.0).round() as i64)
}

fn start_offset(cfg: &Resolved, seed: u64, spec: &StreamSpec) -> u64 {
    if !cfg.measurement.random_start {
        return 0;
    }
    let span = match (&cfg.gcl, &spec.periodicity) {
        (Some(g), _) => g.cycle_ns(),
        (None, Periodicity::Cyclic { cycle_ns }) => *cycle_ns,
        (None, Periodicity::Acyclic { mean_gap_ns }) => *mean_gap_ns,
        (None, Periodicity::Trace { .. }) => 1,
    };
    let mut rng = stream_rng(seed, &format!("start-{}", spec.name));
    rng.random_range(0..span.max(1))
}

/// Runs one attempt over `streams` (indices in records follow the slice).
pub fn simulate(cfg: &Resolved, streams: &[StreamSpec], with_cross: bool, seed: u64) -> Attempt {
    let n = streams.len();
    let measurement_start = cfg.warmup_ns + cfg.epsilon_ns;
    let offsets: Vec<u64> = streams.iter().map(|s| start_offset(cfg, seed, s)).collect();
    let streams_end = measurement_start + offsets.iter().copied().max().unwrap_or(0) + cfg.duration_ns;
    let sim_end = streams_end + cfg.drain_ns;

    let mut slaves = Vec::with_capacity(n + 1);
    let names = std::iter::once("sink").chain(streams.iter().map(|s| s.name.as_str()));
    for (s, name) in names.enumerate() {
        let clock = slave_clock(cfg, seed, name);
        slaves.push(Slave {
            ptp: PtpPort::slave(s as u32, clock, cfg.ptp.servo, cfg.ptp.sync_rate_per_s),
            noise_rng: stream_rng(seed, &format!("ts-noise-{name}")),
            nic: if s == 0 { n } else { s - 1 },
            exchange: None,
            next_seq: 0,
        });
    }

    let mut nics: Vec<Nic> = (0..n)
        .map(|k| Nic {
            queue: VecDeque::new(),
            busy: false,
            cap: cfg.measurement.nic_queue_frames,
            owner: Some(k + 1),
        })
        .collect();
    nics.push(Nic {
        queue: VecDeque::new(),
        busy: false,
        cap: cfg.measurement.nic_queue_frames,
        owner: Some(0),
    });

    let mut cross = Vec::new();
    if let (true, Some(cc)) = (with_cross, &cfg.cross) {
        for l in 0..cc.links {
            let rng = stream_rng(seed, &format!("cross-{l}"));
            if let Some(iter) = PoissonLink::new(cc.spec(), l, cfg.warmup_ns, streams_end, rng) {
                cross.push(CrossSource {
                    iter,
                    next: None,
                    nic: nics.len(),
                    link: l,
                    seq: 0,
                });
                nics.push(Nic {
                    queue: VecDeque::new(),
                    busy: false,
                    cap: cc.nic_queue_frames,
                    owner: None,
                });
            }
        }
    }

    let sources = streams
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let rng = stream_rng(seed, &format!("stream-{}", spec.name));
            let tas = match (&cfg.gcl, cfg.sender_tas.enabled) {
                (Some(gcl), true) if matches!(spec.pcp, 4..=6) => Some(
                    derive_sender_schedule(gcl, spec.pcp, cfg.sender_tas.advance_ns, cfg.sender_tas.dilation).map(
                        |s| {
                            s.with_hold_cap(cfg.sender_tas.hold_cap)
                                .with_link_rate(cfg.port.link_rate_bps)
                                .with_close_margin(cfg.sender_tas.margin_ns)
                        },
                    ),
                ),
                _ => None,
            };
            Source {
                spec,
                iter: ScheduleIter::new(spec, cfg.duration_ns, rng),
                next: None,
                base_local: (measurement_start + offsets[k]) as i64,
                seq: 0,
                slave: k + 1,
                nic: k,
                // A queue that is never open cannot be shaped; such streams are
                // sent unshaped and wait at the switch instead.
                tas: tas.and_then(Result::ok),
                release_armed: None,
            }
        })
        .collect();

    let ports = (0..=n)
        .map(|_| Port {
            port: EgressPort::new(cfg.port.clone()),
            next_select: None,
        })
        .collect();

    let mut tb = Testbed {
        sched: Scheduler::new(),
        cfg,
        gm: DriftingClock::ideal(),
        sources,
        cross,
        nics,
        ports,
        slaves,
        sync_until: SimTime(sim_end),
        ts_noise: (cfg.ptp.timestamp_noise_ns > 0.0)
            .then(|| Normal::new(0.0, cfg.ptp.timestamp_noise_ns).expect("finite stddev")),
        in_transit: 0,
        out: Attempt {
            seed,
            records: vec![Vec::new(); n],
            tallies: vec![StreamTally::default(); n],
            cross: CrossTally::default(),
            ptp: PtpTally::default(),
            deviations: Vec::new(),
            conservation: Conservation::default(),
            departures: Vec::new(),
            warmup_end_ns: cfg.warmup_ns,
            measurement_start_ns: measurement_start,
            measurement_end_ns: sim_end,
            all_locked: false,
        },
    };
    tb.prime(seed);
    while let Some((t, ev)) = tb.sched.pop_due(SimTime(sim_end)) {
        tb.handle(t, ev);
    }
    tb.finish()
}

impl<'a> Testbed<'a> {
    fn at(&mut self, t: SimTime, ev: Ev) {
        self.sched
            .schedule(t, ev)
            .expect("events are never scheduled in the past");
    }

    fn prime(&mut self, seed: u64) {
        let interval = self.slaves[0].ptp.sync_interval_ns();
        for s in 0..self.slaves.len() {
            let name = if s == 0 {
                "sink"
            } else {
                self.sources[s - 1].spec.name.as_str()
            };
            let phase = stream_rng(seed, &format!("sync-phase-{name}")).random_range(0..interval);
            self.at(SimTime(phase), Ev::SyncTx(s));
        }
        for k in 0..self.sources.len() {
            self.advance_source(k, SimTime::ZERO);
        }
        for c in 0..self.cross.len() {
            self.advance_cross(c);
        }
    }

    fn handle(&mut self, now: SimTime, ev: Ev) {
        match ev {
            Ev::Emit(k) => self.on_emit(k, now),
            Ev::Release(k) => self.on_release(k, now),
            Ev::Cross(c) => self.on_cross(c, now),
            Ev::NicDone(i) => {
                self.nics[i].busy = false;
                if let Some(f) = self.nics[i].queue.pop_front() {
                    self.nic_start(i, f, now);
                }
            }
            Ev::Eligible(p, frame) => {
                self.in_transit -= 1;
                match self.ports[p].port.enqueue(frame, now) {
                    EnqueueOutcome::Accepted => self.kick(p, now),
                    EnqueueOutcome::Dropped => self.count_switch_drop(&frame),
                }
            }
            Ev::Select(p) => self.on_select(p, now),
            Ev::SyncTx(s) => self.on_sync_tx(s, now),
            Ev::DelayReq(s, seq) => {
                if self.slaves[s].exchange.as_ref().is_some_and(|x| x.seq == seq) {
                    let frame = Frame::with_wire_size(PTP_STREAM, seq, PCP_PTP, self.cfg.ptp.frame_bytes, now.ns());
                    self.out.conservation.generated += 1;
                    let nic = self.slaves[s].nic;
                    self.nic_submit(nic, frame, now);
                }
            }
            Ev::ExchangeDone(s, seq) => {
                self.in_transit -= 1;
                self.out.conservation.delivered += 1;
                let slave = &mut self.slaves[s];
                let Some(x) = slave.exchange.take_if(|x| x.seq == seq) else {
                    return;
                };
                let (Some(t1), Some(t2), Some(t3), Some(t4)) = (x.t1, x.t2, x.t3, x.t4) else {
                    return;
                };
                let rec = slave
                    .ptp
                    .complete_exchange(SyncTimestamps { t1, t2, t3, t4 }, now, &self.gm);
                self.out.ptp.exchanges += 1;
                self.out.deviations.push(DeviationSample {
                    true_ns: rec.true_ns,
                    slave_id: s as u32,
                    deviation_ns: rec.deviation_ns,
                });
            }
        }
    }

    fn advance_source(&mut self, k: usize, now: SimTime) {
        let src = &mut self.sources[k];
        src.next = src.iter.next();
        if let Some(e) = src.next {
            let clock = &self.slaves[src.slave].ptp.clock;
            let t = clock.true_time_at(src.base_local + e.emit_ns as i64).max(now);
            self.at(t, Ev::Emit(k));
        }
    }

    fn advance_cross(&mut self, c: usize) {
        let src = &mut self.cross[c];
        src.next = src.iter.next();
        if let Some(e) = src.next {
            self.at(SimTime(e.emit_ns), Ev::Cross(c));
        }
    }

    fn on_emit(&mut self, k: usize, now: SimTime) {
        let src = &mut self.sources[k];
        let e = src.next.take().expect("emission scheduled");
        let mut frame = Frame::with_wire_size(k as u32, src.seq, src.spec.pcp, e.on_wire_bytes, now.ns());
        frame.payload_bytes = e.payload_bytes;
        src.seq += 1;
        self.out.tallies[k].sent += 1;
        self.out.conservation.generated += 1;

        let desired = src.base_local + e.emit_ns as i64;
        let slave = src.slave;
        let nic = src.nic;
        match src.tas.as_mut() {
            Some(tas) => match tas.etf_release(frame, desired) {
                Ok(release) => {
                    let t = SenderSchedule::release_true_time(&self.slaves[slave].ptp.clock, release, now);
                    self.arm_release(k, t);
                }
                Err(_) => {
                    self.out.tallies[k].sender_drops += 1;
                    self.out.conservation.dropped += 1;
                }
            },
            None => self.nic_submit(nic, frame, now),
        }
        self.advance_source(k, now);
    }

    fn arm_release(&mut self, k: usize, t: SimTime) {
        let src = &mut self.sources[k];
        if src.release_armed.is_none_or(|a| t < a) {
            src.release_armed = Some(t);
            self.at(t, Ev::Release(k));
        }
    }

    fn on_release(&mut self, k: usize, now: SimTime) {
        if self.sources[k].release_armed != Some(now) {
            return;
        }
        self.sources[k].release_armed = None;
        let slave = self.sources[k].slave;
        let nic = self.sources[k].nic;
        let local = self.slaves[slave].ptp.clock.local_time(now);
        let tas = self.sources[k].tas.as_mut().expect("release without sender TAS");
        let due = tas.pop_due(local);
        let next = tas.next_release();
        for f in due {
            self.nic_submit(nic, f, now);
        }
        if let Some(r) = next {
            let t = SenderSchedule::release_true_time(&self.slaves[slave].ptp.clock, r, now + 1);
            self.arm_release(k, t);
        }
    }

    fn on_cross(&mut self, c: usize, now: SimTime) {
        let src = &mut self.cross[c];
        let e = src.next.take().expect("cross emission scheduled");
        let frame = Frame::with_wire_size(
            CROSS_STREAM_BASE + src.link,
            src.seq,
            PCP_CROSS,
            e.on_wire_bytes,
            now.ns(),
        );
        src.seq += 1;
        let nic = src.nic;
        self.out.cross.sent += 1;
        self.out.conservation.generated += 1;
        self.nic_submit(nic, frame, now);
        self.advance_cross(c);
    }

    fn nic_submit(&mut self, i: usize, frame: Frame, now: SimTime) {
        let nic = &mut self.nics[i];
        if !nic.busy {
            self.nic_start(i, frame, now);
        } else if nic.queue.len() < nic.cap {
            nic.queue.push_back(frame);
        } else {
            self.out.conservation.dropped += 1;
            match frame.stream {
                PTP_STREAM => self.out.ptp.frames_dropped += 1,
                s if s >= CROSS_STREAM_BASE => self.out.cross.nic_drops += 1,
                s => self.out.tallies[s as usize].sender_drops += 1,
            }
        }
    }

    fn nic_start(&mut self, i: usize, mut frame: Frame, now: SimTime) {
        let rate = self.cfg.port.link_rate_bps;
        let ser = serialization_time(frame.on_wire_bytes, rate);
        self.nics[i].busy = true;
        self.at(now + ser, Ev::NicDone(i));
        self.in_transit += 1;
        let owner = self.nics[i].owner;

        if frame.stream == PTP_STREAM {
            let s = owner.expect("Delay_Req from a PTP node");
            let t3 = self.slaves[s].ptp.clock.local_time(now) + self.noise(s);
            let t4 = self.gm.local_time(now + first_byte_ns(rate)) + self.noise(s);
            if let Some(x) = self.slaves[s].exchange.as_mut().filter(|x| x.seq == frame.seq) {
                x.t3 = Some(t3);
                x.t4 = Some(t4);
            }
            self.at(now + ser + DELAY_RESP_NS, Ev::ExchangeDone(s, frame.seq));
            return;
        }
        if let Some(s) = owner {
            frame.tx_ts_ns = self.slaves[s].ptp.clock.local_time(now);
        }
        let p = &self.cfg.port;
        let eligible =
            cut_through_eligible_time(&frame, now, rate, p.cut_through_threshold_bytes, p.processing_delay_ns);
        self.at(eligible, Ev::Eligible(PORT_SINK, frame));
    }

    /// Error on one PTP hardware timestamp of slave `s`'s exchange.
    fn noise(&mut self, s: usize) -> i64 {
        match &self.ts_noise {
            Some(n) => n.sample(&mut self.slaves[s].noise_rng).round() as i64,
            None => 0,
        }
    }

    fn kick(&mut self, p: usize, now: SimTime) {
        let port = &mut self.ports[p];
        if port.port.busy_until() <= now && port.next_select != Some(now) {
            port.next_select = Some(now);
            self.at(now, Ev::Select(p));
        }
    }

    fn on_select(&mut self, p: usize, now: SimTime) {
        if self.ports[p].next_select != Some(now) {
            return;
        }
        self.ports[p].next_select = None;
        match self.ports[p].port.select_next(now) {
            SelectResult::Transmit { frame, start, end } => {
                self.ports[p].next_select = Some(end);
                self.at(end, Ev::Select(p));
                self.deliver(p, frame, start);
            }
            SelectResult::IdleUntil(Some(wake)) => {
                self.ports[p].next_select = Some(wake);
                self.at(wake, Ev::Select(p));
            }
            SelectResult::IdleUntil(None) => {}
        }
    }

    fn deliver(&mut self, p: usize, frame: Frame, start: SimTime) {
        self.out.conservation.delivered += 1;
        let rx = start + first_byte_ns(self.cfg.port.link_rate_bps);
        match frame.stream {
            PTP_STREAM => {
                let t2 = self.slaves[p].ptp.clock.local_time(rx) + self.noise(p);
                let t1 = self.gm.local_time(start) + self.noise(p);
                let turnaround = self.cfg.ptp.turnaround_ns;
                if let Some(x) = self.slaves[p].exchange.as_mut().filter(|x| x.seq == frame.seq) {
                    x.t1 = Some(t1);
                    x.t2 = Some(t2);
                    self.at(rx + turnaround, Ev::DelayReq(p, frame.seq));
                }
            }
            s if s >= CROSS_STREAM_BASE => {}
            s => {
                let rx_ts = self.slaves[0].ptp.clock.local_time(rx);
                self.out.records[s as usize].push(MeasurementRecord {
                    stream: s,
                    seq: frame.seq,
                    tx_ts_ns: frame.tx_ts_ns,
                    rx_ts_ns: rx_ts,
                    latency_ns: rx_ts - frame.tx_ts_ns,
                });
            }
        }
    }

    fn on_sync_tx(&mut self, s: usize, now: SimTime) {
        let next = now + self.slaves[s].ptp.sync_interval_ns();
        if next < self.sync_until {
            self.at(next, Ev::SyncTx(s));
        }
        let slave = &mut self.slaves[s];
        if slave.exchange.is_some() {
            slave.ptp.record_timeout();
        }
        let seq = slave.next_seq;
        slave.next_seq += 1;
        slave.exchange = Some(Exchange {
            seq,
            ..Exchange::default()
        });
        let frame = Frame::with_wire_size(PTP_STREAM, seq, PCP_PTP, self.cfg.ptp.frame_bytes, now.ns());
        self.out.conservation.generated += 1;
        match self.ports[s].port.enqueue(frame, now) {
            EnqueueOutcome::Accepted => self.kick(s, now),
            EnqueueOutcome::Dropped => self.count_switch_drop(&frame),
        }
    }

    fn count_switch_drop(&mut self, frame: &Frame) {
        self.out.conservation.dropped += 1;
        match frame.stream {
            PTP_STREAM => self.out.ptp.frames_dropped += 1,
            s if s >= CROSS_STREAM_BASE => self.out.cross.switch_drops += 1,
            s => self.out.tallies[s as usize].switch_drops += 1,
        }
    }

    fn finish(mut self) -> Attempt {
        let queued_nic: usize = self.nics.iter().map(|n| n.queue.len()).sum();
        let held: usize = self
            .sources
            .iter()
            .filter_map(|s| s.tas.as_ref())
            .map(SenderSchedule::held)
            .sum();
        let queued_ports: usize = self.ports.iter().map(|p| p.port.queued_frames()).sum();
        self.out.conservation.in_flight = (queued_nic + held + queued_ports) as u64 + self.in_transit;
        self.out.all_locked = self.slaves.iter().all(|s| s.ptp.is_locked());
        self.out.ptp.sync_timeouts = self.slaves.iter().map(|s| s.ptp.sync_timeouts).sum();
        self.out.ptp.anomalies = self.slaves.iter().map(|s| s.ptp.anomalies).sum();
        self.out.departures = std::mem::take(&mut self.ports[PORT_SINK].port.departures);
        self.out
    }
}

/// Time from first bit on the wire to the first byte received.
fn first_byte_ns(rate_bps: u64) -> u64 {
    (8 * crate::simcore::NS_PER_S + rate_bps / 2) / rate_bps
}

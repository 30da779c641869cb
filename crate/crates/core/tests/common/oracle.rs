//! Brute-force egress timeline: advances one nanosecond at a time and
//! re-derives eligibility, gate state and non-preemptive service from
//! scratch at every step. Slow, but shares no code with the event engine.

use std::collections::VecDeque;

use tsnsim_core::switch::{Departure, GclEntry};
use tsnsim_core::traffic::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Fifo,
    Priority,
    Gated,
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub policy: Policy,
    /// Gate schedule for `Gated`, starting at t = 0.
    pub gcl: Vec<GclEntry>,
    pub rate_bps: u64,
    pub pool_bytes: u32,
    pub queue_limit: Option<u32>,
}

fn wire_ns(bytes: u32, rate_bps: u64) -> u64 {
    let bits = (u128::from(bytes) + 20) * 8 * 1_000_000_000;
    let rate = u128::from(rate_bps);
    ((bits + rate / 2) / rate) as u64
}

fn mask_at(gcl: &[GclEntry], t: u64) -> u8 {
    let cycle: u64 = gcl.iter().map(|e| e.duration_ns).sum();
    let mut off = t % cycle;
    for e in gcl {
        if off < e.duration_ns {
            return e.gate_mask;
        }
        off -= e.duration_ns;
    }
    unreachable!()
}

struct Waiting {
    frame: Frame,
    order: usize,
    at: u64,
}

/// `arrivals` are `(eligible_ns, frame)`; same-instant arrivals enqueue in
/// slice order before any selection at that instant.
pub fn timeline(cfg: &OracleConfig, arrivals: &[(u64, Frame)]) -> Vec<Departure> {
    let mut queues: Vec<VecDeque<Waiting>> = (0..8).map(|_| VecDeque::new()).collect();
    let mut out = Vec::new();
    let mut free_at = 0u64;
    let mut accepted = 0usize;
    let last_arrival = arrivals.iter().map(|a| a.0).max().unwrap_or(0);
    let mut t = 0u64;
    loop {
        for (at, f) in arrivals {
            if *at != t {
                continue;
            }
            let q = f.pcp as usize;
            let pool: u32 = queues.iter().flatten().map(|w| w.frame.on_wire_bytes).sum();
            let mine: u32 = queues[q].iter().map(|w| w.frame.on_wire_bytes).sum();
            let per_queue_full =
                cfg.policy != Policy::Fifo && cfg.queue_limit.is_some_and(|lim| mine + f.on_wire_bytes > lim);
            if pool + f.on_wire_bytes > cfg.pool_bytes || per_queue_full {
                continue;
            }
            queues[q].push_back(Waiting {
                frame: *f,
                order: accepted,
                at: t,
            });
            accepted += 1;
        }
        if t >= free_at {
            let waiting: u8 = (0..8).filter(|&q| !queues[q].is_empty()).fold(0, |m, q| m | (1 << q));
            let chosen = match cfg.policy {
                Policy::Fifo => (0..8)
                    .filter(|&q| !queues[q].is_empty())
                    .min_by_key(|&q| queues[q][0].order),
                Policy::Priority => (0..8).rev().find(|&q| !queues[q].is_empty()),
                Policy::Gated => {
                    let open = mask_at(&cfg.gcl, t);
                    (0..8).rev().find(|&q| !queues[q].is_empty() && open & (1 << q) != 0)
                }
            };
            if let Some(q) = chosen {
                let w = queues[q].pop_front().unwrap();
                let end = t + wire_ns(w.frame.on_wire_bytes, cfg.rate_bps);
                out.push(Departure {
                    queue: q as u8,
                    stream: w.frame.stream,
                    seq: w.frame.seq,
                    enqueued_ns: w.at,
                    start_ns: t,
                    end_ns: end,
                    waiting_mask: waiting,
                });
                free_at = end;
            }
        }
        if t >= last_arrival && t >= free_at && queues.iter().all(VecDeque::is_empty) {
            return out;
        }
        t += 1;
    }
}

/// A random instance with at most 10 frames and 3 GCL entries, as both the
/// oracle's and the engine's configuration.
pub fn tiny_instance(seed: u64) -> (OracleConfig, tsnsim_core::switch::PortConfig, Vec<(u64, Frame)>) {
    use rand::{Rng, SeedableRng};
    use tsnsim_core::simcore::SimTime;
    use tsnsim_core::switch::{Gcl, PortConfig, Selection};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pcps = [0u8, 4, 5, 6, 7];
    let n = rng.random_range(1..=10);
    let arrivals: Vec<(u64, Frame)> = (0..n)
        .map(|i| {
            let pcp = pcps[rng.random_range(0..pcps.len())];
            let wire = rng.random_range(64..=1522);
            let at = if rng.random_bool(0.3) {
                0
            } else {
                rng.random_range(0..60_000)
            };
            (at, Frame::with_wire_size(i as u32 % 3, i as u64, pcp, wire, 0))
        })
        .collect();

    let k = rng.random_range(1..=3);
    let mut gcl: Vec<GclEntry> = (0..k)
        .map(|_| GclEntry {
            gate_mask: rng.random(),
            duration_ns: rng.random_range(2_000..30_000),
        })
        .collect();
    let used = arrivals.iter().fold(0u8, |m, (_, f)| m | (1 << f.pcp));
    let j = rng.random_range(0..k);
    gcl[j].gate_mask |= used;

    let policy = [Policy::Fifo, Policy::Priority, Policy::Gated][rng.random_range(0..3)];
    let pool_bytes = rng.random_range(3_000..=18_000);
    let queue_limit = rng.random_bool(0.5).then(|| rng.random_range(1_600..=12_000));
    let rate_bps = 1_000_000_000;

    let selection = match policy {
        Policy::Fifo => Selection::None,
        Policy::Priority => Selection::Spq,
        Policy::Gated => Selection::Tas(Gcl::new(gcl.clone(), SimTime::ZERO).unwrap()),
    };
    let port = PortConfig {
        link_rate_bps: rate_bps,
        selection,
        shared_buffer_bytes: pool_bytes,
        queue_limit_bytes: queue_limit,
        ..PortConfig::default()
    };
    let oracle = OracleConfig {
        policy,
        gcl,
        rate_bps,
        pool_bytes,
        queue_limit,
    };
    (oracle, port, arrivals)
}

/// Engine departures for the same instance.
pub fn engine(port: tsnsim_core::switch::PortConfig, arrivals: &[(u64, Frame)]) -> Vec<Departure> {
    use tsnsim_core::simcore::SimTime;
    let a: Vec<(SimTime, Frame)> = arrivals.iter().map(|(t, f)| (SimTime(*t), *f)).collect();
    tsnsim_core::switch::run_port(port, &a)
}

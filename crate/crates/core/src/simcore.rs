//! Discrete-event engine: integer-nanosecond time base, a totally ordered
//! event queue, and seeded per-component random streams.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NS_PER_US: u64 = 1_000;
pub const NS_PER_MS: u64 = 1_000_000;
pub const NS_PER_S: u64 = 1_000_000_000;

/// Nanoseconds since the simulation epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_us(us: u64) -> Self {
        SimTime(us * NS_PER_US)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * NS_PER_MS)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * NS_PER_S)
    }

    pub const fn ns(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, other: SimTime) -> u64 {
        self.0.saturating_sub(other.0)
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl AddAssign<u64> for SimTime {
    fn add_assign(&mut self, rhs: u64) {
        self.0 += rhs;
    }
}

impl Sub for SimTime {
    type Output = u64;
    fn sub(self, rhs: SimTime) -> u64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

/// Handle returned by [`Scheduler::schedule`], usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(u64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("causality violation: event at {requested} scheduled while clock is at {now}")]
    CausalityViolation { now: SimTime, requested: SimTime },
}

struct Entry<E> {
    fire_at: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (fire_at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

/// Event queue ordered by `(fire_at, insertion sequence)`.
///
/// `E` is the action descriptor; the owner of the scheduler dispatches it.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    cancelled: HashSet<u64>,
    processed: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events still queued (including cancelled ones not yet reaped).
    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Total events dispatched since construction.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn schedule(&mut self, fire_at: SimTime, payload: E) -> Result<EventId, SimError> {
        if fire_at < self.now {
            return Err(SimError::CausalityViolation {
                now: self.now,
                requested: fire_at,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { fire_at, seq, payload });
        Ok(EventId(seq))
    }

    /// Schedules `delay` nanoseconds after the current time; cannot violate causality.
    pub fn schedule_in(&mut self, delay: u64, payload: E) -> EventId {
        let at = self.now + delay;
        self.schedule(at, payload)
            .expect("relative schedule is never in the past")
    }

    /// Fire time of the earliest queued event. Cancelled events that have not
    /// been reaped yet are included.
    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.fire_at)
    }

    /// Marks an event as cancelled. Cancelling an event that already fired is a no-op.
    pub fn cancel(&mut self, id: EventId) {
        if id.0 < self.next_seq {
            self.cancelled.insert(id.0);
        }
    }

    /// Pops the next live event with `fire_at <= t_end`, advancing the clock to it.
    pub fn pop_due(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        loop {
            match self.heap.peek() {
                Some(top) if top.fire_at <= t_end => {}
                _ => return None,
            }
            let entry = self.heap.pop().expect("peeked");
            if !self.cancelled.is_empty() && self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            self.processed += 1;
            return Some((entry.fire_at, entry.payload));
        }
    }

    /// Moves the clock forward to `t` once no events remain before it.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Processes every event with `fire_at <= t_end` in order, then sets the
    /// clock to `t_end`. Returns the number of events dispatched.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Scheduler<E>, SimTime, E),
    {
        let mut count = 0;
        while let Some((t, ev)) = self.pop_due(t_end) {
            handler(self, t, ev);
            count += 1;
        }
        self.advance_to(t_end);
        count
    }
}

/// Deterministic PRNG used throughout the simulator. ChaCha8 output is
/// specified bit-for-bit, so draws are identical across platforms.
pub type SimRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Opens the named random stream for `seed`. Streams with different names are
/// independent, so adding a component never shifts another one's draws.
pub fn stream_rng(seed: u64, stream: &str) -> SimRng {
    let mut state = seed ^ fnv1a(stream.as_bytes()).rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derives a fresh seed from a base seed and an index (used for retries and sweeps).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut state = seed ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    splitmix64(&mut state)
}

//! Sender-side gate schedule: frames are held and released so they reach the
//! switch while their queue's gate is open.
//!
//! All times in this module are in the sender's local clock domain. The
//! sender GCL is the switch's window pattern for one queue, shifted earlier
//! by the release advance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clocks::DriftingClock;
use crate::simcore::SimTime;
use crate::switch::{Gcl, GclEntry, DEFAULT_CUT_THROUGH_BYTES, DEFAULT_PROCESSING_NS};
use crate::traffic::{serialization_time, Frame};

pub const DEFAULT_HOLD_CAP: usize = 1024;

/// Lead time that makes a frame released at `W - advance` become eligible at
/// the switch exactly when the gate opens at `W`: cut-through accumulation of
/// the threshold bytes plus processing.
pub const DEFAULT_CLOSE_MARGIN_NS: u64 = 100;
pub const DEFAULT_ADVANCE_NS: u64 = DEFAULT_CUT_THROUGH_BYTES as u64 * 8 + DEFAULT_PROCESSING_NS;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SenderTasError {
    #[error("queue {0} is never open in the switch GCL")]
    QueueNeverOpen(u8),
    #[error("dilation must be at least 1")]
    ZeroDilation,
    #[error("hold buffer full ({0} frames)")]
    HoldOverflow(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SenderTasConfig {
    pub enabled: bool,
    pub advance_ns: u64,
    /// Each sender window closes this much early so a frame released at the
    /// very end still reaches an open gate despite residual clock error.
    pub margin_ns: u64,
    pub dilation: u64,
    pub hold_cap: usize,
}

impl Default for SenderTasConfig {
    fn default() -> Self {
        SenderTasConfig {
            enabled: false,
            advance_ns: DEFAULT_ADVANCE_NS,
            margin_ns: DEFAULT_CLOSE_MARGIN_NS,
            dilation: 1,
            hold_cap: DEFAULT_HOLD_CAP,
        }
    }
}

/// Union of circular intervals `(start, len)` on `[0, cycle)`, as sorted,
/// disjoint, non-wrapping `[start, end)` pieces.
fn circular_union(intervals: &[(u64, u64)], cycle: u64) -> Vec<(u64, u64)> {
    let mut pieces: Vec<(u64, u64)> = Vec::new();
    for &(s, len) in intervals {
        if len >= cycle {
            return vec![(0, cycle)];
        }
        let s = s % cycle;
        if s + len <= cycle {
            pieces.push((s, s + len));
        } else {
            pieces.push((s, cycle));
            pieces.push((0, s + len - cycle));
        }
    }
    pieces.sort_unstable();
    let mut merged: Vec<(u64, u64)> = Vec::new();
    for (s, e) in pieces {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

#[derive(Debug, Clone)]
pub struct SenderSchedule {
    pub gcl: Gcl,
    pub queue: u8,
    pub advance_ns: u64,
    pub link_rate_bps: u64,
    hold: BTreeMap<(i64, u64), Frame>,
    hold_cap: usize,
    /// Per stream: end of the last scheduled transmission.
    tail: BTreeMap<u32, i64>,
    insertions: u64,
    pub drops: u64,
}

/// Sender GCL for `queue`: the switch's open windows, each stretched by
/// `dilation` from its start (clipped to the cycle), shifted `advance_ns`
/// earlier.
pub fn derive_sender_schedule(
    switch_gcl: &Gcl,
    queue: u8,
    advance_ns: u64,
    dilation: u64,
) -> Result<SenderSchedule, SenderTasError> {
    if dilation == 0 {
        return Err(SenderTasError::ZeroDilation);
    }
    let windows = switch_gcl.open_windows(queue);
    if windows.is_empty() {
        return Err(SenderTasError::QueueNeverOpen(queue));
    }
    let cycle = switch_gcl.cycle_ns();
    let stretched: Vec<(u64, u64)> = windows
        .iter()
        .map(|&(s, e)| (s, (e - s).saturating_mul(dilation)))
        .collect();
    let open = circular_union(&stretched, cycle);

    let bit = 1u8 << queue;
    let mut entries = Vec::new();
    let mut at = 0;
    for (s, e) in open {
        if s > at {
            entries.push(GclEntry {
                gate_mask: 0,
                duration_ns: s - at,
            });
        }
        entries.push(GclEntry {
            gate_mask: bit,
            duration_ns: e - s,
        });
        at = e;
    }
    if at < cycle {
        entries.push(GclEntry {
            gate_mask: 0,
            duration_ns: cycle - at,
        });
    }
    // Shifting the base earlier by `advance` shifts every window earlier.
    let base = switch_gcl.base_time().ns();
    let lift = advance_ns.div_ceil(cycle) * cycle;
    let gcl = Gcl::new(entries, SimTime(base + lift - advance_ns)).expect("non-empty schedule");
    Ok(SenderSchedule {
        gcl,
        queue,
        advance_ns,
        link_rate_bps: crate::traffic::GIGABIT,
        hold: BTreeMap::new(),
        hold_cap: DEFAULT_HOLD_CAP,
        tail: BTreeMap::new(),
        insertions: 0,
        drops: 0,
    })
}

fn to_sim(local: i64) -> SimTime {
    SimTime(local.max(0) as u64)
}

impl SenderSchedule {
    pub fn with_hold_cap(mut self, cap: usize) -> Self {
        self.hold_cap = cap;
        self
    }

    pub fn with_link_rate(mut self, rate_bps: u64) -> Self {
        self.link_rate_bps = rate_bps;
        self
    }

    /// Ends every open window `margin_ns` earlier. A window that wraps the
    /// cycle boundary is only shortened at its true end; windows shorter than
    /// the margin disappear (unless that would leave none).
    pub fn with_close_margin(mut self, margin_ns: u64) -> Self {
        if margin_ns == 0 {
            return self;
        }
        let bit = 1u8 << self.queue;
        let old = self.gcl.entries();
        let n = old.len();
        let mut entries = Vec::with_capacity(n + 2);
        for (i, e) in old.iter().enumerate() {
            let open = e.gate_mask & bit != 0;
            let next_open = old[(i + 1) % n].gate_mask & bit != 0;
            if open && !next_open {
                let keep = e.duration_ns.saturating_sub(margin_ns);
                if keep > 0 {
                    entries.push(GclEntry {
                        gate_mask: bit,
                        duration_ns: keep,
                    });
                }
                entries.push(GclEntry {
                    gate_mask: 0,
                    duration_ns: e.duration_ns - keep,
                });
            } else {
                entries.push(*e);
            }
        }
        if entries.iter().any(|e| e.gate_mask & bit != 0) {
            self.gcl = Gcl::new(entries, self.gcl.base_time()).expect("same cycle, positive entries");
        }
        self
    }

    pub fn is_open(&self, local_ns: i64) -> bool {
        self.gcl.is_open(self.queue, to_sim(local_ns))
    }

    /// First local instant at or after `local_ns` inside an open window.
    pub fn next_open(&self, local_ns: i64) -> i64 {
        let t = self
            .gcl
            .next_open(self.queue, to_sim(local_ns))
            .expect("schedule has an open window");
        (t.ns() as i64).max(local_ns)
    }

    pub fn held(&self) -> usize {
        self.hold.len()
    }

    /// Schedules `frame` for release at or after `desired_local`, inside an
    /// open window and after the stream's previous frame has left the wire.
    /// Returns the release instant (local time).
    pub fn etf_release(&mut self, frame: Frame, desired_local: i64) -> Result<i64, SenderTasError> {
        if self.hold.len() >= self.hold_cap {
            self.drops += 1;
            return Err(SenderTasError::HoldOverflow(self.hold_cap));
        }
        let after_prev = self.tail.get(&frame.stream).copied().unwrap_or(i64::MIN);
        let release = self.next_open(desired_local.max(after_prev));
        let ser = serialization_time(frame.on_wire_bytes, self.link_rate_bps) as i64;
        self.tail.insert(frame.stream, release + ser);
        self.hold.insert((release, self.insertions), frame);
        self.insertions += 1;
        Ok(release)
    }

    /// Earliest pending release, local time.
    pub fn next_release(&self) -> Option<i64> {
        self.hold.keys().next().map(|&(t, _)| t)
    }

    /// Removes and returns every frame due at or before `now_local`, in
    /// release order.
    pub fn pop_due(&mut self, now_local: i64) -> Vec<Frame> {
        let mut out = Vec::new();
        while let Some(entry) = self.hold.first_entry() {
            if entry.key().0 > now_local {
                break;
            }
            out.push(entry.remove());
        }
        out
    }

    /// True instant at which `clock` reads `local_ns` (never before `floor`).
    pub fn release_true_time(clock: &DriftingClock, local_ns: i64, floor: SimTime) -> SimTime {
        clock.true_time_at(local_ns).max(floor)
    }
}

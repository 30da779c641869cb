//! Free-running clocks, the four-timestamp PTP exchange and a PI servo that
//! disciplines slave clocks toward the grandmaster.
//!
//! Timestamps are latched when the first bit leaves the wire (TX) and when the
//! first byte has been received (RX). Queueing before the latch point is
//! therefore invisible to the offset computation.

use serde::{Deserialize, Serialize};

use crate::simcore::{SimTime, NS_PER_S};

const PPB_SCALE: i128 = 1_000_000_000;

/// Divides and rounds to the nearest integer, ties to even.
pub(crate) fn div_round_half_even(num: i128, den: i128) -> i128 {
    assert!(den > 0);
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => {
            if q % 2 == 0 {
                q
            } else {
                q + 1
            }
        }
    }
}

/// A clock whose local time is piecewise linear in true time.
///
/// Within a segment the slope is `1 + rate_ppb * 1e-9`, where the rate is the
/// intrinsic drift plus the servo's frequency adjustment. Local time is kept
/// internally in units of 1e-9 ns so re-anchoring never loses precision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftingClock {
    anchor_true: SimTime,
    anchor_local_fp: i128,
    drift_ppb: i64,
    adj_ppb: i64,
    granularity_ns: u64,
}

impl DriftingClock {
    /// A clock reading `base_offset_ns` at true time zero, drifting by `drift_ppb`.
    pub fn new(base_offset_ns: i64, drift_ppb: i64) -> Self {
        DriftingClock {
            anchor_true: SimTime::ZERO,
            anchor_local_fp: i128::from(base_offset_ns) * PPB_SCALE,
            drift_ppb,
            adj_ppb: 0,
            granularity_ns: 1,
        }
    }

    /// An ideal clock equal to true time.
    pub fn ideal() -> Self {
        Self::new(0, 0)
    }

    /// Quantizes readings down to multiples of `ns` (8 mimics an I210 NIC).
    pub fn with_granularity(mut self, ns: u64) -> Self {
        self.granularity_ns = ns.max(1);
        self
    }

    pub fn drift_ppb(&self) -> i64 {
        self.drift_ppb
    }

    pub fn adjustment_ppb(&self) -> i64 {
        self.adj_ppb
    }

    /// Effective frequency deviation from true time.
    pub fn rate_ppb(&self) -> i64 {
        self.drift_ppb + self.adj_ppb
    }

    pub fn anchor(&self) -> SimTime {
        self.anchor_true
    }

    fn local_fp(&self, true_now: SimTime) -> i128 {
        debug_assert!(true_now >= self.anchor_true, "clock read before its anchor");
        let elapsed = i128::from(true_now.ns()) - i128::from(self.anchor_true.ns());
        self.anchor_local_fp + elapsed * (PPB_SCALE + i128::from(self.rate_ppb()))
    }

    /// Local reading at `true_now`, rounded to the nearest nanosecond.
    pub fn local_time(&self, true_now: SimTime) -> i64 {
        let ns = div_round_half_even(self.local_fp(true_now), PPB_SCALE) as i64;
        if self.granularity_ns > 1 {
            ns.div_euclid(self.granularity_ns as i64) * self.granularity_ns as i64
        } else {
            ns
        }
    }

    /// Earliest true instant (within the current segment) at which the local
    /// clock reads at least `local_ns`. Never earlier than the anchor.
    pub fn true_time_at(&self, local_ns: i64) -> SimTime {
        let target = i128::from(local_ns) * PPB_SCALE;
        let slope = PPB_SCALE + i128::from(self.rate_ppb());
        let delta = target - self.anchor_local_fp;
        if delta <= 0 {
            return self.anchor_true;
        }
        // ceil(delta / slope)
        let elapsed = (delta + slope - 1) / slope;
        self.anchor_true + elapsed as u64
    }

    /// Starts a new segment at `true_now` with servo adjustment `adj_ppb`.
    pub fn set_adjustment(&mut self, true_now: SimTime, adj_ppb: i64) {
        self.reanchor(true_now);
        self.adj_ppb = adj_ppb;
    }

    /// Steps the phase by `delta_ns` at `true_now`.
    pub fn step(&mut self, true_now: SimTime, delta_ns: i64) {
        self.reanchor(true_now);
        self.anchor_local_fp += i128::from(delta_ns) * PPB_SCALE;
    }

    fn reanchor(&mut self, true_now: SimTime) {
        if true_now > self.anchor_true {
            self.anchor_local_fp = self.local_fp(true_now);
            self.anchor_true = true_now;
        }
    }
}

/// Result of the two-way delay computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathDelay {
    pub delay_ns: i64,
    /// Set when the computed delay is negative; the sample is kept regardless.
    pub anomaly: bool,
}

/// `((t2 - t1) + (t4 - t3)) / 2` with ties rounded to even.
pub fn compute_path_delay(t1: i64, t2: i64, t3: i64, t4: i64) -> PathDelay {
    let sum = i128::from(t2 - t1) + i128::from(t4 - t3);
    let delay_ns = div_round_half_even(sum, 2) as i64;
    PathDelay {
        delay_ns,
        anomaly: delay_ns < 0,
    }
}

/// PI servo parameters. Proportional gain follows
/// `kp = min(kp_scale * interval_s^kp_exponent, norm_max / interval_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServoConfig {
    pub kp_scale: f64,
    pub kp_exponent: f64,
    pub norm_max: f64,
    /// Integral gain, per sample (ppb added to the integrator per ns of offset).
    pub ki: f64,
    pub max_freq_adj_ppb: f64,
    /// Span of free-running samples used to estimate the initial frequency error.
    pub freq_estimate_span_ns: u64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        ServoConfig {
            kp_scale: 0.7,
            kp_exponent: -0.3,
            norm_max: 0.7,
            ki: 0.005,
            max_freq_adj_ppb: 900_000_000.0,
            freq_estimate_span_ns: NS_PER_S,
        }
    }
}

impl ServoConfig {
    pub fn kp(&self, interval_ns: u64) -> f64 {
        let interval_s = interval_ns as f64 / NS_PER_S as f64;
        (self.kp_scale * interval_s.powf(self.kp_exponent)).min(self.norm_max / interval_s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PtpServo {
    pub config: ServoConfig,
    /// Integrator state in ppb.
    pub integral_ppb: f64,
    /// Number of outputs that hit the frequency clamp.
    pub clamp_events: u64,
}

impl PtpServo {
    pub fn new(config: ServoConfig) -> Self {
        PtpServo {
            config,
            integral_ppb: 0.0,
            clamp_events: 0,
        }
    }

    /// One PI update. `offset_error_ns` is slave minus master; the returned
    /// frequency adjustment (ppb) steers the slave against that error.
    pub fn step(&mut self, offset_error_ns: i64, interval_ns: u64) -> i64 {
        assert!(interval_ns > 0, "servo interval must be positive");
        let x = offset_error_ns as f64;
        let kp = self.config.kp(interval_ns);
        let ki_term = self.config.ki * x;
        let raw = kp * x + self.integral_ppb + ki_term;
        let max = self.config.max_freq_adj_ppb;
        let out = if raw > max {
            self.clamp_events += 1;
            log::debug!("servo output {raw:.0} ppb clamped to {max:.0}");
            max
        } else if raw < -max {
            self.clamp_events += 1;
            log::debug!("servo output {raw:.0} ppb clamped to {:.0}", -max);
            -max
        } else {
            // Integrator only advances while unsaturated (anti-windup).
            self.integral_ppb += ki_term;
            raw
        };
        -(out.round() as i64)
    }
}

/// Standalone closed-loop servo simulation: a clock that starts `initial_offset_ns`
/// ahead of perfect time with no drift, sampled every `interval_ns` by an ideal
/// offset measurement. Returns the offset after each sample.
pub fn servo_step_response(
    config: ServoConfig,
    initial_offset_ns: i64,
    interval_ns: u64,
    samples: usize,
) -> Vec<(SimTime, i64)> {
    let mut servo = PtpServo::new(config);
    let mut clock = DriftingClock::new(initial_offset_ns, 0);
    let mut out = Vec::with_capacity(samples);
    let mut t = SimTime::ZERO;
    for _ in 0..samples {
        let offset = clock.local_time(t) - t.ns() as i64;
        let adj = servo.step(offset, interval_ns);
        clock.set_adjustment(t, adj);
        t += interval_ns;
        out.push((t, clock.local_time(t) - t.ns() as i64));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PtpRole {
    Grandmaster,
    Slave,
}

/// Lock progression, after the fashion of a PI servo's unlocked/jump/locked states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum LockState {
    Unsynced,
    Estimating { since_true: SimTime, first_offset: i64 },
    Locked,
}

/// Outcome of one completed sync/delay-request exchange.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub true_ns: u64,
    pub path_delay: PathDelay,
    pub measured_offset_ns: i64,
    pub freq_adj_ppb: i64,
    /// Slave local minus grandmaster local at `true_ns`, after the update.
    pub deviation_ns: i64,
}

/// Four hardware timestamps of one exchange, in each side's local nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncTimestamps {
    /// Sync departure, grandmaster clock.
    pub t1: i64,
    /// Sync arrival, slave clock.
    pub t2: i64,
    /// Delay_Req departure, slave clock.
    pub t3: i64,
    /// Delay_Req arrival, grandmaster clock.
    pub t4: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PtpPort {
    pub id: u32,
    pub role: PtpRole,
    pub clock: DriftingClock,
    pub servo: PtpServo,
    pub sync_rate_per_s: u32,
    pub last_path_delay_ns: i64,
    pub anomalies: u64,
    pub sync_timeouts: u64,
    pub deviation_log: Vec<(u64, i64)>,
    lock: LockState,
}

impl PtpPort {
    pub fn grandmaster(id: u32, clock: DriftingClock, sync_rate_per_s: u32) -> Self {
        Self::with_role(id, PtpRole::Grandmaster, clock, ServoConfig::default(), sync_rate_per_s)
    }

    pub fn slave(id: u32, clock: DriftingClock, servo: ServoConfig, sync_rate_per_s: u32) -> Self {
        Self::with_role(id, PtpRole::Slave, clock, servo, sync_rate_per_s)
    }

    fn with_role(id: u32, role: PtpRole, clock: DriftingClock, servo: ServoConfig, sync_rate_per_s: u32) -> Self {
        assert!(sync_rate_per_s > 0, "sync rate must be positive");
        PtpPort {
            id,
            role,
            clock,
            servo: PtpServo::new(servo),
            sync_rate_per_s,
            last_path_delay_ns: 0,
            anomalies: 0,
            sync_timeouts: 0,
            deviation_log: Vec::new(),
            lock: LockState::Unsynced,
        }
    }

    pub fn sync_interval_ns(&self) -> u64 {
        NS_PER_S / u64::from(self.sync_rate_per_s)
    }

    pub fn is_locked(&self) -> bool {
        matches!(self.lock, LockState::Locked)
    }

    pub fn record_timeout(&mut self) {
        self.sync_timeouts += 1;
    }

    /// Consumes the timestamps of a finished exchange at true time `now`:
    /// updates the path delay, runs the servo and logs the deviation against
    /// `master` at `now`.
    pub fn complete_exchange(&mut self, ts: SyncTimestamps, now: SimTime, master: &DriftingClock) -> DeviationRecord {
        assert_eq!(self.role, PtpRole::Slave, "grandmaster clocks are never disciplined");
        let path_delay = compute_path_delay(ts.t1, ts.t2, ts.t3, ts.t4);
        if path_delay.anomaly {
            self.anomalies += 1;
        }
        self.last_path_delay_ns = path_delay.delay_ns;
        let offset = ts.t2 - ts.t1 - path_delay.delay_ns;
        let interval = self.sync_interval_ns();

        let mut freq_adj_ppb = self.clock.adjustment_ppb();
        match self.lock {
            LockState::Unsynced => {
                self.clock.step(now, -offset);
                self.lock = LockState::Estimating {
                    since_true: now,
                    first_offset: 0,
                };
            }
            LockState::Estimating {
                since_true,
                first_offset,
            } => {
                let span = now - since_true;
                if span >= self.servo.config.freq_estimate_span_ns {
                    // Offset growth over the span is the residual frequency error.
                    let drift_ppb =
                        div_round_half_even(i128::from(offset - first_offset) * PPB_SCALE, i128::from(span)) as i64;
                    let adj = self.clock.adjustment_ppb() - drift_ppb;
                    self.servo.integral_ppb = -(adj as f64);
                    self.clock.step(now, -offset);
                    self.clock.set_adjustment(now, adj);
                    freq_adj_ppb = adj;
                    self.lock = LockState::Locked;
                }
            }
            LockState::Locked => {
                freq_adj_ppb = self.servo.step(offset, interval);
                self.clock.set_adjustment(now, freq_adj_ppb);
            }
        }

        let deviation_ns = self.clock.local_time(now) - master.local_time(now);
        self.deviation_log.push((now.ns(), deviation_ns));
        DeviationRecord {
            true_ns: now.ns(),
            path_delay,
            measured_offset_ns: offset,
            freq_adj_ppb,
            deviation_ns,
        }
    }
}

/// Timing of one exchange's path, in true nanoseconds. Residence times model
/// queueing ahead of the timestamp latch (invisible to the protocol); wire
/// times run from first bit out to first byte in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SyncPath {
    pub sync_residence_ns: u64,
    pub sync_wire_ns: u64,
    /// Slave turnaround between Sync reception and Delay_Req enqueue.
    pub turnaround_ns: u64,
    pub delay_req_residence_ns: u64,
    pub delay_req_wire_ns: u64,
    /// Set when either message is dropped on the way.
    pub lost: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("sync timeout: exchange lost in the network")]
pub struct SyncTimeout;

/// Runs one sync + delay-request exchange between `master` and `slave` over
/// `path`, starting at true time `start`. Returns the deviation record or a
/// timeout if the path drops a message.
pub fn ptp_sync_round(
    master: &PtpPort,
    slave: &mut PtpPort,
    path: &SyncPath,
    start: SimTime,
) -> Result<DeviationRecord, SyncTimeout> {
    if path.lost {
        slave.record_timeout();
        return Err(SyncTimeout);
    }
    let sync_tx = start + path.sync_residence_ns;
    let sync_rx = sync_tx + path.sync_wire_ns;
    let req_tx = sync_rx + path.turnaround_ns + path.delay_req_residence_ns;
    let req_rx = req_tx + path.delay_req_wire_ns;
    let ts = SyncTimestamps {
        t1: master.clock.local_time(sync_tx),
        t2: slave.clock.local_time(sync_rx),
        t3: slave.clock.local_time(req_tx),
        t4: master.clock.local_time(req_rx),
    };
    Ok(slave.complete_exchange(ts, req_rx, &master.clock))
}

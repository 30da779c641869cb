//! Discrete-event model of a single-switch TSN measurement testbed: drifting
//! clocks disciplined by PTP, cyclic and acyclic traffic sources, a
//! cut-through switch with FIFO, strict-priority and time-aware egress, and
//! sender-side gating, plus the measurement procedure around them.

pub mod clocks;
pub mod orchestrator;
pub mod sender_tas;
pub mod simcore;
pub mod switch;
pub mod traffic;

pub use clocks::{DriftingClock, PtpPort, ServoConfig};
pub use orchestrator::config::{ConfigError, OutputFormat, ScenarioConfig};
pub use orchestrator::stats::{ccdf, summary_stats, SummaryStats};
pub use orchestrator::{run_scenario, sweep, MeasurementRecord, RunResult, ScenarioError, StreamResult, SweepPoint};
pub use sender_tas::{SenderSchedule, SenderTasConfig};
pub use simcore::{derive_seed, stream_rng, Scheduler, SimRng, SimTime};
pub use switch::{make_gcl, Gcl, GclEntry, GclTemplate, PortConfig, Selection};
pub use traffic::{
    build_stream_set, serialization_time, CrossTrafficSpec, Frame, JitterProfile, StreamSetId, StreamSpec,
};

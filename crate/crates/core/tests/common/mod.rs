//! Helpers shared by the integration-test targets.

#![allow(dead_code)]

pub mod oracle;

use tsnsim_core::orchestrator::presets;
use tsnsim_core::{run_scenario, RunResult, ScenarioConfig};

pub fn run_preset(id: &str) -> RunResult {
    let cfg = presets::load(id).expect("bundled preset").expect("valid preset");
    run_scenario(&cfg).expect("scenario runs")
}

pub fn run_text(text: &str) -> RunResult {
    run_scenario(&ScenarioConfig::from_toml_str(text).expect("valid scenario")).expect("scenario runs")
}

/// Nearest-rank decile `k` (1..=9) of an unsorted sample.
pub fn decile(xs: &[i64], k: usize) -> i64 {
    let mut v = xs.to_vec();
    v.sort_unstable();
    let rank = (k * v.len()).div_ceil(10).max(1);
    v[rank - 1]
}

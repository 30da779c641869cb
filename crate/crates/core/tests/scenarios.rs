mod common;

use std::collections::BTreeSet;

use tsnsim_core::orchestrator::export::export;
use tsnsim_core::orchestrator::presets;
use tsnsim_core::traffic::serialization_time;
use tsnsim_core::{run_scenario, OutputFormat, ScenarioConfig};

use common::run_preset;

const SER_1522: i64 = 12_336;

fn short(id: &str, extra: &[(&str, &str)]) -> ScenarioConfig {
    let mut o: Vec<(String, String)> = vec![("duration_s".into(), "1.0".into())];
    o.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    ScenarioConfig::from_toml_with_overrides(presets::text(id).unwrap(), &o).unwrap()
}

#[test]
fn same_seed_gives_byte_identical_exports() {
    let cfg = short("generic-ct-gcl4-1-gb", &[]);
    let all = [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = export(&run_scenario(&cfg).unwrap(), a.path(), &all).unwrap();
    let fb = export(&run_scenario(&cfg).unwrap(), b.path(), &all).unwrap();
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn different_seeds_differ() {
    let a = run_scenario(&short("generic-ct", &[])).unwrap();
    let b = run_scenario(&short("generic-ct", &[("seed", "2")])).unwrap();
    assert_ne!(a.streams[0].records, b.streams[0].records);
}

#[test]
fn spq_orders_tail_latency_by_priority() {
    let r = run_preset("generic-ct-spq");
    let p: Vec<i64> = r.streams.iter().map(|s| s.stats.unwrap().p999).collect();
    assert!(p[0] <= p[1] && p[1] <= p[2], "{p:?}");
}

#[test]
fn collisions_without_cross_traffic_form_a_staircase() {
    let r = run_preset("generic");
    let lat = r.streams[0].latencies();
    let min = *lat.iter().min().unwrap();
    let support: BTreeSet<i64> = lat.iter().copied().collect();
    let step = support.range(min + SER_1522 - 500..=min + SER_1522 + 500).count();
    assert!(step > 0, "no mass one frame time above the minimum {min}");
}

#[test]
fn sender_tas_with_ideal_senders_only_yields_to_ptp() {
    let r = run_scenario(&short("txinject", &[("jitter", "\"ideal\"")])).unwrap();
    let base = run_scenario(&short("baseline-generic", &[("jitter", "\"ideal\"")])).unwrap();
    let (tx, b) = (r.streams[0].stats.unwrap(), base.streams[0].stats.unwrap());
    // A Sync frame in the always-open PTP queue is the only thing that can
    // still hold the protected frame back.
    let ptp_frame = serialization_time(90, 1_000_000_000) as i64;
    assert!(
        tx.max - b.max <= ptp_frame + 20,
        "sender TAS max {} vs baseline max {}",
        tx.max,
        b.max
    );
    assert!(
        tx.p999 - b.max <= 20,
        "sender TAS p99.9 {} vs baseline max {}",
        tx.p999,
        b.max
    );
    assert_eq!(r.streams[0].tally.switch_drops, 0);
}

#[test]
fn switch_tas_alone_degrades_the_protected_tail() {
    let with = run_preset("txinject");
    let without = run_scenario(&short("txinject", &[("sender_tas.enabled", "false")])).unwrap();
    let (a, b) = (
        with.streams[0].stats.unwrap().p999,
        without.streams[0].stats.unwrap().p999,
    );
    assert!(b > a, "sender TAS p99.9 {a}, switch TAS only {b}");
}

#[test]
fn every_preset_conserves_frames() {
    for id in presets::ids() {
        let r = run_scenario(&short(id, &[("duration_s", "0.2")])).unwrap();
        assert!(r.conservation.balanced(), "{id}: {:?}", r.conservation);
        assert!(r.retry_count < 10);
    }
}

#[test]
fn departures_never_overlap_on_the_sink_link() {
    let r = run_scenario(&short("generic-ct-gcl1-1", &[("switch.log_departures", "true")])).unwrap();
    assert!(!r.departures.is_empty());
    for w in r.departures.windows(2) {
        assert!(w[0].end_ns <= w[1].start_ns, "{:?} overlaps {:?}", w[0], w[1]);
    }
}

#[test]
#[ignore = "the model yields equal means for all three streams under a shared FIFO; kept as a record"]
fn no_qos_inverts_mean_latency() {
    let r = run_preset("generic-ct");
    let (hi, lo) = (r.streams[0].stats.unwrap().mean, r.streams[2].stats.unwrap().mean);
    assert!(hi >= lo, "high {hi} low {lo}");
}

//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are reported but do not fail the
//! target; any other failure exits non-zero.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use tsnsim_core::orchestrator::export::write_records_csv;
use tsnsim_core::orchestrator::PTP_STREAM;
use tsnsim_core::simcore::SimTime;
use tsnsim_core::switch::{make_gcl, Departure, GclTemplate, Selection, GCL_UNIT_NS};
use tsnsim_core::traffic::serialization_time;
use tsnsim_core::{run_scenario, RunResult, ScenarioConfig};

use common::oracle::{engine, timeline, tiny_instance};
use common::{decile, run_preset, run_text};

/// Criteria whose calibrated model does not reach the pinned threshold.
const KNOWN_FAILURES: &[u32] = &[4, 7];

const SER_1522: u64 = 12_336;
const CT_THRESHOLD: u32 = 337;

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn high(r: &RunResult) -> &tsnsim_core::orchestrator::StreamResult {
    &r.streams[0]
}

fn single_stream(wire: u32) -> String {
    format!(
        r#"seed = 5
duration_s = 0.05
stream_set = "custom"
selection = "spq"

[[streams]]
name = "probe"
pcp = 6
periodicity = {{ kind = "cyclic", cycle_ns = 100000 }}
payload = {{ kind = "uniform-frame", min_frame = {wire}, max_frame = {wire} }}

[ptp]
warmup_s = 2.0
"#
    )
}

fn c1_cut_through_law() -> Outcome {
    let t0 = Instant::now();
    let mut sizes: Vec<u32> = (64..=1522).step_by(64).collect();
    sizes.extend([336, 337, 338, 1522]);
    sizes.sort_unstable();
    sizes.dedup();
    let medians: Vec<(u32, i64)> = sizes
        .iter()
        .map(|&s| {
            let r = run_text(&single_stream(s));
            (s, high(&r).stats.expect("samples").median)
        })
        .collect();
    let knee = medians.iter().find(|(s, _)| *s == CT_THRESHOLD).unwrap().1;
    let mut worst = 0i64;
    for &(s, l) in &medians {
        let expected = knee + 8 * (i64::from(s.min(CT_THRESHOLD)) - i64::from(CT_THRESHOLD));
        worst = worst.max((l - expected).abs());
    }
    let elapsed = t0.elapsed();
    outcome(
        worst <= 8 && within(elapsed, 5),
        format!(
            "{} sizes, latency at 64 B {} ns, at 337 B {knee} ns, at 1522 B {} ns, worst residual {worst} ns, {:.2?}",
            medians.len(),
            medians[0].1,
            medians.last().unwrap().1,
            elapsed
        ),
    )
}

fn c2_serialization() -> Outcome {
    let ser = serialization_time(1522, 1_000_000_000);
    let rel = (ser as f64 - 12_300.0).abs() / 12_300.0;
    outcome(
        ser == SER_1522 && rel <= 0.005,
        format!("{ser} ns, {:.3}% from 12.3 us", rel * 100.0),
    )
}

fn c3_spq_blocking() -> Outcome {
    let t0 = Instant::now();
    let r = run_preset("generic-ct-spq");
    let s = high(&r).stats.unwrap();
    let spread = s.max - s.min;
    let elapsed = t0.elapsed();
    outcome(
        spread <= SER_1522 as i64 + 500 && within(elapsed, 30),
        format!(
            "high min {} max {} spread {spread} ns (bound {}), {:.2?}",
            s.min,
            s.max,
            SER_1522 + 500,
            elapsed
        ),
    )
}

fn c4_priority_inversion() -> Outcome {
    let t0 = Instant::now();
    let r = run_preset("generic-ct");
    let st: Vec<_> = r.streams.iter().map(|s| s.stats.unwrap()).collect();
    let ordered = st[0].mean >= st[1].mean && st[1].mean >= st[2].mean;
    let maxes_in_band = st.iter().all(|s| (50_000..=200_000).contains(&s.max));
    let elapsed = t0.elapsed();
    outcome(
        ordered && maxes_in_band && within(elapsed, 30),
        format!(
            "means {:.1} / {:.1} / {:.1} ns (high/med/low), maxes {} / {} / {} ns, {:.2?}",
            st[0].mean, st[1].mean, st[2].mean, st[0].max, st[1].max, st[2].max, elapsed
        ),
    )
}

fn c5_ptp_precision() -> Outcome {
    let t0 = Instant::now();
    let quiet = run_preset("ptp-precision").max_abs_deviation_ns.unwrap();
    let loaded = run_preset("ptp-precision-ct").max_abs_deviation_ns.unwrap();
    let elapsed = t0.elapsed();
    outcome(
        quiet <= 30 && (loaded - quiet).abs() <= 5 && within(elapsed, 10),
        format!(
            "max |deviation| {quiet} ns idle, {loaded} ns with cross traffic, {:.2?}",
            elapsed
        ),
    )
}

/// Expected template tables, written out by hand.
fn expected_tables() -> Vec<(u8, bool, Vec<u8>, u64)> {
    const P: u8 = 0x80;
    let (h, m, l, x) = (1u8 << 6, 1u8 << 5, 1u8 << 4, 1u8);
    vec![
        (1, true, vec![h | P, m | P, l | P, x | P, P], 75_000),
        (1, false, vec![h | P, m | P, l | P, x | P], 60_000),
        (2, false, vec![h | P, h | m | P, h | l | P, h | x | P], 60_000),
        (
            3,
            false,
            vec![h | P, h | m | P, h | m | l | P, h | m | l | x | P],
            60_000,
        ),
        (
            4,
            true,
            vec![h | P, m | P, h | l | P, m | x | P, h | l | P, m | P, h | P, P],
            120_000,
        ),
        (
            4,
            false,
            vec![h | P, m | P, h | l | P, m | x | P, h | l | P, m | P, h | P],
            105_000,
        ),
    ]
}

fn c6_gcl_structure() -> Outcome {
    let mut problems = Vec::new();
    for (config, gb, masks, cycle) in expected_tables() {
        let g = make_gcl(config, GCL_UNIT_NS, gb, SimTime::ZERO).unwrap();
        let got: Vec<u8> = g.entries().iter().map(|e| e.gate_mask).collect();
        if got != masks || g.cycle_ns() != cycle || g.entries().iter().any(|e| e.duration_ns != GCL_UNIT_NS) {
            problems.push(format!("config {config} gb {gb}"));
        }
    }
    for config in [2, 3] {
        if make_gcl(config, GCL_UNIT_NS, true, SimTime::ZERO).is_ok() {
            problems.push(format!("config {config} accepted a guard band"));
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
    let g = make_gcl(4, GCL_UNIT_NS, true, SimTime(12_345)).unwrap();
    let mut mismatches = 0u32;
    for _ in 0..1_000_000 {
        let t = rng.random_range(0..10_000_000_000u64);
        let k = rng.random_range(1..1_000u64);
        let state = g.gate_state(SimTime(t));
        let slot = ((t + g.cycle_ns() - 12_345 % g.cycle_ns()) % g.cycle_ns()) / GCL_UNIT_NS;
        if state != g.gate_state(SimTime(t + k * g.cycle_ns())) || state != g.entries()[slot as usize].gate_mask {
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        problems.push(format!("{mismatches} gate-state mismatches"));
    }
    let pass = problems.is_empty();
    outcome(
        pass,
        if pass {
            "6 tables exact, 10^6 random instants cyclic".into()
        } else {
            problems.join("; ")
        },
    )
}

fn c7_tas_fingerprints() -> Outcome {
    let t0 = Instant::now();
    let gcl1 = run_preset("generic-ct-gcl1-1");
    let cycle = GclTemplate {
        config: 1,
        unit_ns: GCL_UNIT_NS,
        slot_units: 1,
        guard_band: false,
    }
    .build(SimTime::ZERO)
    .unwrap()
    .cycle_ns() as i64;
    let lat = high(&gcl1).latencies();
    let tail = lat.iter().filter(|&&x| x > cycle).count() as f64 / lat.len() as f64;
    let a = tail >= 0.001;

    let gcl2 = run_preset("generic-ct-gcl2-3");
    let (p2, p1) = (high(&gcl2).stats.unwrap().p999, high(&gcl1).stats.unwrap().p999);
    let b = p2 < p1;

    let gcl4 = run_preset("generic-ct-gcl4-1-gb");
    let base = run_preset("baseline-generic");
    let (m4, m0) = (high(&gcl4).stats.unwrap().min, high(&base).stats.unwrap().min);
    let c = (m4 - m0).abs() <= 50;
    let elapsed = t0.elapsed();
    let mark = |ok: bool| if ok { "ok" } else { "miss" };
    outcome(
        a && b && c && within(elapsed, 120),
        format!(
            "(a) {} {:.3}% of frames above the {cycle} ns cycle; (b) {} p99.9 {p2} < {p1}; (c) {} min {m4} vs baseline {m0}; {:.2?}",
            mark(a),
            tail * 100.0,
            mark(b),
            mark(c),
            elapsed
        ),
    )
}

fn c8_distributed_tas() -> Outcome {
    let t0 = Instant::now();
    let tx = run_preset("txinject");
    let base = run_preset("baseline-generic");
    let (l, b) = (high(&tx).latencies(), high(&base).latencies());
    let s = high(&tx).stats.unwrap();
    let worst = (1..=9).map(|k| (decile(&l, k) - decile(&b, k)).abs()).max().unwrap();
    let elapsed = t0.elapsed();
    outcome(
        s.stddev <= 50.0 && worst <= 100 && (s.mean - 4968.0).abs() <= 100.0 && within(elapsed, 30),
        format!(
            "high mean {:.1} ns stddev {:.1} ns, worst decile gap to baseline {worst} ns, {:.2?}",
            s.mean, s.stddev, elapsed
        ),
    )
}

fn random_scenario(rng: &mut impl Rng, seed: u64) -> String {
    let set = ["theta", "psi", "omega"][rng.random_range(0..3)];
    let jitter = ["ideal", "dpdk", "socket"][rng.random_range(0..3)];
    let selection = ["none", "spq", "tas"][rng.random_range(0..3)];
    let mut text = format!(
        "seed = {seed}\nduration_s = 0.05\nstream_set = \"{set}\"\njitter = \"{jitter}\"\nselection = \"{selection}\"\n\
         [switch]\nlog_departures = true\n[ptp]\nwarmup_s = 2.0\n[measurement]\nisolated_streams = {}\n",
        rng.random_bool(0.2)
    );
    if rng.random_bool(0.7) {
        text.push_str(&format!(
            "[cross_traffic]\nenabled = true\nlinks = {}\n",
            rng.random_range(1..=2)
        ));
    }
    if selection == "tas" {
        let config = rng.random_range(1..=4u8);
        let gb = matches!(config, 1 | 4) && rng.random_bool(0.5);
        text.push_str(&format!(
            "[gcl]\nconfig = {config}\nslot_units = {}\nguard_band = {gb}\n",
            rng.random_range(1..=3)
        ));
    }
    text
}

fn fifo_per_queue(deps: &[Departure]) -> bool {
    let mut last_seq = std::collections::BTreeMap::new();
    for q in 0..8u8 {
        let mine: Vec<&Departure> = deps.iter().filter(|d| d.queue == q).collect();
        if mine.windows(2).any(|w| w[0].enqueued_ns > w[1].enqueued_ns) {
            return false;
        }
        for d in mine.iter().filter(|d| d.stream != PTP_STREAM) {
            if last_seq.insert(d.stream, d.seq).is_some_and(|prev| prev >= d.seq) {
                return false;
            }
        }
    }
    true
}

/// Isolated scenarios concatenate one departure log per stream; each restarts
/// the clock.
fn runs(deps: &[Departure]) -> impl Iterator<Item = &[Departure]> {
    deps.chunk_by(|a, b| a.start_ns <= b.start_ns)
}

fn dominance(deps: &[Departure], selection: &Selection) -> bool {
    deps.iter().all(|d| {
        let above = !((2u16 << d.queue) - 1) as u8;
        match selection {
            Selection::None => true,
            Selection::Spq => d.waiting_mask & above == 0,
            Selection::Tas(g) => d.waiting_mask & g.gate_state(SimTime(d.start_ns)) & above == 0,
        }
    })
}

fn csv_bytes(r: &RunResult, dir: &std::path::Path, tag: &str) -> Vec<u8> {
    let path = dir.join(format!("{tag}.csv"));
    write_records_csv(r, &path).unwrap();
    std::fs::read(path).unwrap()
}

fn c9_conservation_determinism() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();
    let mut departures = 0usize;
    for i in 0..20u64 {
        let text = random_scenario(&mut rng, 1000 + i);
        let cfg = ScenarioConfig::from_toml_str(&text).unwrap();
        let selection = cfg.validate().unwrap().port.selection;
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        departures += a.departures.len();
        let checks = [
            ("conservation", a.conservation.balanced()),
            ("fifo", runs(&a.departures).all(fifo_per_queue)),
            ("dominance", dominance(&a.departures, &selection)),
            ("csv", csv_bytes(&a, dir.path(), "a") == csv_bytes(&b, dir.path(), "b")),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("scenario {i}: {name}"));
            }
        }
    }
    let elapsed = t0.elapsed();
    outcome(
        failures.is_empty() && within(elapsed, 120),
        if failures.is_empty() {
            format!("20 scenarios, {departures} departures checked, {:.2?}", elapsed)
        } else {
            failures.join("; ")
        },
    )
}

fn c10_oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    let cases = 500u64;
    let mismatched: Vec<u64> = (0..cases)
        .filter(|&seed| {
            let (oracle, port, arrivals) = tiny_instance(seed);
            engine(port, &arrivals) != timeline(&oracle, &arrivals)
        })
        .collect();
    let elapsed = t0.elapsed();
    outcome(
        mismatched.is_empty() && within(elapsed, 10),
        format!("{cases} instances, {} mismatches, {:.2?}", mismatched.len(), elapsed),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "cut-through law", c1_cut_through_law),
        (2, "full-frame serialization", c2_serialization),
        (3, "SPQ blocking bound", c3_spq_blocking),
        (4, "priority inversion without QoS", c4_priority_inversion),
        (5, "PTP precision", c5_ptp_precision),
        (6, "GCL structure", c6_gcl_structure),
        (7, "TAS fingerprints", c7_tas_fingerprints),
        (8, "distributed TAS", c8_distributed_tas),
        (9, "conservation and determinism", c9_conservation_determinism),
        (10, "oracle equivalence", c10_oracle_equivalence),
    ];
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_FAILURES.contains(&id) {
            " (known)"
        } else {
            ""
        };
        println!("criterion {id:>2} {verdict}{note}: {name}: {}", o.detail);
        if !o.pass && note.is_empty() {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

use std::path::Path;
use std::process::{Command, Output};

fn tsnsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsnsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const SHORT: &[&str] = &["--set", "duration_s=0.05", "--set", "ptp.warmup_s=2.0"];

fn with_short<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(SHORT.iter().copied()).collect()
}

#[test]
fn reproduce_writes_result_and_ccdf() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tsnsim(
        &with_short(&["reproduce", "baseline-generic", "--out", "out"]),
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["result.json", "ccdf.svg", "records.csv", "stats.csv"] {
        assert!(tmp.path().join("out").join(f).is_file(), "{f} missing");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("theta-high"));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("s.toml");
    std::fs::write(
        &scenario,
        "name = \"s\"\nseed = 3\nduration_s = 0.05\nselection = \"tas\"\n[ptp]\nwarmup_s = 2.0\n",
    )
    .unwrap();
    let o = tsnsim(
        &[
            "sweep",
            "s.toml",
            "--vary",
            "gcl.slot_units=1,3",
            "--out",
            "res",
            "-f",
            "json",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for v in ["1", "3"] {
        assert!(tmp
            .path()
            .join(format!("res/s-gcl.slot_units-{v}/result.json"))
            .is_file());
    }
}

#[test]
fn compare_draws_a_boxplot_from_result_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    for (id, dir) in [("generic-spq", "a"), ("generic", "b")] {
        let o = tsnsim(&with_short(&["reproduce", id, "-o", dir, "-f", "json"]), tmp.path());
        assert_eq!(code(&o), 0);
    }
    let o = tsnsim(&["compare", "a", "b", "--svg", "box.svg"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(tmp.path().join("box.svg")).unwrap();
    assert_eq!(svg.matches("class=\"box\"").count(), 6);
}

#[test]
fn missing_seed_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("s.toml"), "duration_s = 0.05\n").unwrap();
    let o = tsnsim(&["run", "s.toml"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn seed_flag_supplies_a_missing_seed() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("s.toml"), "duration_s = 0.05\n[ptp]\nwarmup_s = 2.0\n").unwrap();
    let o = tsnsim(&["run", "s.toml", "--seed", "4", "-o", "r", "-f", "csv"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("r/records.csv").is_file());
}

#[test]
fn unknown_id_and_bad_usage_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&tsnsim(&["reproduce", "no-such-figure"], tmp.path())), 1);
    assert_eq!(code(&tsnsim(&["frobnicate"], tmp.path())), 1);
}

#[test]
fn exhausted_retries_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tsnsim(
        &with_short(&[
            "reproduce",
            "generic",
            "--set",
            "ptp.deviation_threshold_ns=0",
            "-o",
            "x",
        ]),
        tmp.path(),
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn io_failures_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&tsnsim(&["run", "absent.toml"], tmp.path())), 3);
    std::fs::write(tmp.path().join("blocker"), "").unwrap();
    let o = tsnsim(&with_short(&["reproduce", "generic", "-o", "blocker/out"]), tmp.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn list_prints_bundled_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tsnsim(&["reproduce", "--list"], tmp.path());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l == "txinject") && out.lines().any(|l| l == "generic-ct-gcl3-1"));
}

//! Result files: per-record CSV with a statistics sidecar, the full result as
//! JSON, PTP deviation CSV, and SVG plots (CCDF per run, boxplot across runs).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::OutputFormat;
use super::stats::{ccdf, nearest_rank, summary_stats, SummaryStats};
use super::RunResult;

pub const RECORDS_CSV: &str = "records.csv";
pub const STATS_CSV: &str = "stats.csv";
pub const DEVIATION_CSV: &str = "ptp_deviation.csv";
pub const RESULT_JSON: &str = "result.json";
pub const CCDF_SVG: &str = "ccdf.svg";

/// Lowest probability drawn on CCDF plots.
pub const CCDF_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExportError + '_ {
    move |source| ExportError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// One row of `records.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub stream: String,
    pub seq: u64,
    pub tx_ns: i64,
    pub rx_ns: i64,
    pub latency_ns: i64,
}

#[derive(Debug, Serialize)]
struct StatsRow<'a> {
    stream: &'a str,
    sent: u64,
    received: usize,
    switch_drops: u64,
    sender_drops: u64,
    min: Option<i64>,
    mean: Option<f64>,
    median: Option<i64>,
    stddev: Option<f64>,
    p99: Option<i64>,
    p999: Option<i64>,
    p9999: Option<i64>,
    max: Option<i64>,
}

#[derive(Debug, Serialize)]
struct DeviationRow {
    true_ns: u64,
    slave_id: u32,
    deviation_ns: i64,
}

pub fn write_records_csv(result: &RunResult, path: &Path) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for s in &result.streams {
        for r in &s.records {
            w.serialize(CsvRecord {
                stream: s.name.clone(),
                seq: r.seq,
                tx_ns: r.tx_ts_ns,
                rx_ns: r.rx_ts_ns,
                latency_ns: r.latency_ns,
            })
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn read_records_csv(path: &Path) -> Result<Vec<CsvRecord>, ExportError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

/// Statistics per stream name recomputed from parsed CSV rows.
pub fn stats_from_records(rows: &[CsvRecord]) -> BTreeMap<String, SummaryStats> {
    let mut by: BTreeMap<String, Vec<i64>> = BTreeMap::new();
    for r in rows {
        by.entry(r.stream.clone()).or_default().push(r.latency_ns);
    }
    by.into_iter()
        .map(|(k, v)| {
            let s = summary_stats(&v).expect("grouped rows are non-empty");
            (k, s)
        })
        .collect()
}

pub fn write_stats_csv(result: &RunResult, path: &Path) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for s in &result.streams {
        let st = s.stats;
        w.serialize(StatsRow {
            stream: &s.name,
            sent: s.tally.sent,
            received: s.records.len(),
            switch_drops: s.tally.switch_drops,
            sender_drops: s.tally.sender_drops,
            min: st.map(|x| x.min),
            mean: st.map(|x| x.mean),
            median: st.map(|x| x.median),
            stddev: st.map(|x| x.stddev),
            p99: st.map(|x| x.p99),
            p999: st.map(|x| x.p999),
            p9999: st.map(|x| x.p9999),
            max: st.map(|x| x.max),
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_deviation_csv(result: &RunResult, path: &Path) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for d in &result.deviations {
        w.serialize(DeviationRow {
            true_ns: d.true_ns,
            slave_id: d.slave_id,
            deviation_ns: d.deviation_ns,
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json(result: &RunResult, path: &Path) -> Result<(), ExportError> {
    let text = serde_json::to_string_pretty(result).map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json(path: &Path) -> Result<RunResult, ExportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the requested formats into `dir` (created if missing) and returns
/// the written paths.
pub fn export(result: &RunResult, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>, ExportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            OutputFormat::Csv => {
                for (name, write) in [
                    (
                        RECORDS_CSV,
                        write_records_csv as fn(&RunResult, &Path) -> Result<(), ExportError>,
                    ),
                    (STATS_CSV, write_stats_csv),
                    (DEVIATION_CSV, write_deviation_csv),
                ] {
                    let p = dir.join(name);
                    write(result, &p)?;
                    written.push(p);
                }
            }
            OutputFormat::Json => {
                let p = dir.join(RESULT_JSON);
                write_json(result, &p)?;
                written.push(p);
            }
            OutputFormat::Svg => {
                let p = dir.join(CCDF_SVG);
                fs::write(&p, ccdf_svg(result)).map_err(io_err(&p))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

/// Colour for a stream: high, medium and low priority keep fixed colours,
/// everything else cycles through a neutral palette.
fn stream_colour(pcp: u8, index: usize) -> &'static str {
    match pcp {
        6 => "#d62728",
        5 => "#2ca02c",
        4 => "#1f77b4",
        _ => ["#9467bd", "#8c564b", "#e377c2", "#7f7f7f"][index % 4],
    }
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 180.0;
const MT: f64 = 20.0;
const MB: f64 = 50.0;

struct Frame2d {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame2d {
    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x0) / (self.x1 - self.x0).max(f64::EPSILON) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y0) / (self.y1 - self.y0).max(f64::EPSILON) * (H - MT - MB)
    }
}

fn svg_open(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
}

fn axes(out: &mut String, f: &Frame2d, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (ML, W - MR, MT, H - MB);
    let _ = writeln!(
        out,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
    );
    for d in (f.y0.floor() as i32)..=(f.y1.ceil() as i32) {
        let y = f.py(f64::from(d));
        if y < t - 0.5 || y > b + 0.5 {
            continue;
        }
        let _ = writeln!(
            out,
            r##"<line x1="{l}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            l - 6.0,
            y + 4.0
        );
    }
    for i in 0..=5 {
        let v = f.x0 + (f.x1 - f.x0) * f64::from(i) / 5.0;
        let x = f.px(v);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"#,
            b + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        (l + r) / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{y_label}</text>"#,
        (t + b) / 2.0
    );
}

fn legend(out: &mut String, row: usize, colour: &str, text: &str) {
    let x = W - MR + 14.0;
    let y = MT + 10.0 + 18.0 * row as f64;
    let _ = writeln!(
        out,
        r#"<rect x="{x}" y="{:.2}" width="12" height="12" fill="{colour}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
        y - 10.0,
        x + 18.0,
        y,
        escape(text)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-y CCDF of every stream's latency (x in microseconds). Streams without
/// samples are left out of the plot and marked in the legend.
pub fn ccdf_svg(result: &RunResult) -> String {
    let curves: Vec<(usize, Vec<(i64, f64)>)> = result
        .streams
        .iter()
        .enumerate()
        .filter_map(|(i, s)| ccdf(&s.latencies()).ok().map(|c| (i, c)))
        .collect();
    let (lo, hi) = curves
        .iter()
        .flat_map(|(_, c)| c.iter().map(|p| p.0))
        .fold((i64::MAX, i64::MIN), |(a, b), x| (a.min(x), b.max(x)));
    let (lo, hi) = if lo > hi { (0, 1) } else { (lo, hi.max(lo + 1)) };
    let f = Frame2d {
        x0: lo as f64 / 1e3,
        x1: hi as f64 / 1e3,
        y0: CCDF_FLOOR.log10(),
        y1: 0.0,
    };

    let mut out = String::new();
    svg_open(&mut out);
    axes(&mut out, &f, "latency [us]", "P(latency > x)");
    for (i, s) in result.streams.iter().enumerate() {
        let colour = stream_colour(s.pcp, i);
        match curves.iter().find(|(k, _)| *k == i) {
            Some((_, c)) => {
                let mut d = String::new();
                let mut last: Option<(f64, f64)> = None;
                let mut prev_y = f.py(0.0);
                for (j, &(x, p)) in c.iter().enumerate() {
                    let px = f.px(x as f64 / 1e3);
                    let py = f.py(p.max(CCDF_FLOOR).log10());
                    let final_point = j + 1 == c.len();
                    let far = last.is_none_or(|(lx, ly)| (px - lx).abs() >= 0.5 || (py - ly).abs() >= 0.5);
                    if far || final_point {
                        if last.is_none() {
                            let _ = write!(d, "M{px:.2} {py:.2}");
                        } else {
                            let _ = write!(d, " L{px:.2} {prev_y:.2} L{px:.2} {py:.2}");
                        }
                        last = Some((px, py));
                        prev_y = py;
                    }
                }
                let _ = writeln!(
                    out,
                    r#"<path class="ccdf" d="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#
                );
                legend(&mut out, i, colour, &s.name);
            }
            None => legend(&mut out, i, "#cccccc", &format!("{} (no samples)", s.name)),
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Log-y boxplot with one box per (scenario, stream): whiskers at min and
/// max, box from the first to the third quartile, a bar at the median and a
/// dot at the 99.9th percentile.
pub fn boxplot_svg(results: &[(String, &RunResult)]) -> String {
    struct Box5 {
        label: String,
        colour: &'static str,
        v: [i64; 6],
    }
    let mut boxes = Vec::new();
    for (label, r) in results {
        for (i, s) in r.streams.iter().enumerate() {
            let mut lat = s.latencies();
            if lat.is_empty() {
                continue;
            }
            lat.sort_unstable();
            let q = |p| nearest_rank(&lat, p);
            boxes.push(Box5 {
                label: format!("{label}/{}", s.name),
                colour: stream_colour(s.pcp, i),
                v: [lat[0], q(0.25), q(0.5), q(0.75), q(0.999), lat[lat.len() - 1]],
            });
        }
    }
    let lo = boxes.iter().map(|b| b.v[0]).min().unwrap_or(1).max(1) as f64;
    let hi = boxes.iter().map(|b| b.v[5]).max().unwrap_or(10).max(2) as f64;
    let f = Frame2d {
        x0: 0.0,
        x1: boxes.len().max(1) as f64,
        y0: lo.log10().floor(),
        y1: hi.log10().ceil().max(lo.log10().floor() + 1.0),
    };
    let y = |v: i64| f.py((v.max(1) as f64).log10());

    let mut out = String::new();
    svg_open(&mut out);
    let (l, r, t, b) = (ML, W - MR, MT, H - MB);
    let _ = writeln!(
        out,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
    );
    for d in (f.y0 as i32)..=(f.y1 as i32) {
        let yy = f.py(f64::from(d));
        let _ = writeln!(
            out,
            r##"<line x1="{l}" y1="{yy:.2}" x2="{r}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d} ns</text>"##,
            l - 6.0,
            yy + 4.0
        );
    }
    let slot = (r - l) / boxes.len().max(1) as f64;
    for (i, bx) in boxes.iter().enumerate() {
        let cx = l + slot * (i as f64 + 0.5);
        let half = (slot * 0.3).min(20.0);
        let [min, q1, med, q3, p999, max] = bx.v;
        let _ = writeln!(
            out,
            r#"<g class="box-group"><line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/><rect class="box" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.5" stroke="black"/><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/><circle cx="{cx:.2}" cy="{:.2}" r="2.5"/><text transform="translate({cx:.2} {:.2}) rotate(45)" font-size="9">{}</text></g>"#,
            y(max),
            y(min),
            cx - half,
            y(q3),
            2.0 * half,
            (y(q1) - y(q3)).max(0.5),
            bx.colour,
            cx - half,
            y(med),
            cx + half,
            y(med),
            y(p999),
            b + 10.0,
            escape(&bx.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

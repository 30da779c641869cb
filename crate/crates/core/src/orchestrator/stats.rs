//! Latency statistics: nearest-rank percentiles and the empirical CCDF.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no latency samples")]
pub struct EmptySamples;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: u64,
    pub min: i64,
    pub mean: f64,
    pub median: i64,
    /// Population standard deviation.
    pub stddev: f64,
    pub p99: i64,
    pub p999: i64,
    pub p9999: i64,
    pub max: i64,
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p * n)` (1-based), clamped to `[1, n]`.
pub fn nearest_rank(sorted: &[i64], p: f64) -> i64 {
    assert!(!sorted.is_empty(), "percentile of an empty slice");
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Rank `ceil(num * n / den)` computed exactly in integers.
fn rank_exact(n: usize, num: u64, den: u64) -> usize {
    let r = (n as u128 * u128::from(num)).div_ceil(u128::from(den)) as usize;
    r.clamp(1, n)
}

pub fn summary_stats(latencies: &[i64]) -> Result<SummaryStats, EmptySamples> {
    if latencies.is_empty() {
        return Err(EmptySamples);
    }
    let mut sorted = latencies.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let at = |num, den| sorted[rank_exact(n, num, den) - 1];

    let sum: i128 = sorted.iter().map(|&x| i128::from(x)).sum();
    let mean = sum as f64 / n as f64;
    let var = sorted
        .iter()
        .map(|&x| {
            let d = x as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n as f64;

    Ok(SummaryStats {
        count: n as u64,
        min: sorted[0],
        mean,
        median: at(1, 2),
        stddev: var.sqrt(),
        p99: at(99, 100),
        p999: at(999, 1000),
        p9999: at(9999, 10000),
        max: sorted[n - 1],
    })
}

/// Empirical CCDF: `(x, P(L > x))` for every distinct sample value, ascending,
/// preceded by `(min - 1, 1.0)`.
pub fn ccdf(latencies: &[i64]) -> Result<Vec<(i64, f64)>, EmptySamples> {
    if latencies.is_empty() {
        return Err(EmptySamples);
    }
    let mut sorted = latencies.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut out = Vec::with_capacity(n.min(4096) + 1);
    out.push((sorted[0] - 1, 1.0));
    let mut i = 0;
    while i < n {
        let x = sorted[i];
        let mut j = i;
        while j < n && sorted[j] == x {
            j += 1;
        }
        out.push((x, (n - j) as f64 / n as f64));
        i = j;
    }
    Ok(out)
}

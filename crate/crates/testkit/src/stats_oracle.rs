//! Straight-line statistics oracle.
//!
//! Coverage is counted millisecond by millisecond and the median by sorting
//! a fresh copy, so no interval arithmetic is shared with `rosann-core`.

use rosann_core::annotation::{Project, TierKind};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTier {
    pub name: String,
    pub count: u64,
    pub min: Option<u64>,
    pub max: Option<u64>,
    pub avg: Option<f64>,
    pub median: Option<f64>,
    pub total: u64,
    pub percentage: f64,
    pub latency: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOverall {
    pub occurrences: u64,
    pub frequency_per_min: f64,
    pub average_duration_ms: f64,
    pub time_ratio: f64,
    pub latency: Option<u64>,
    pub covered: u64,
}

pub fn tier_stats(name: &str, spans: &[(u64, u64)], t: u64) -> OracleTier {
    let mut d: Vec<u64> = Vec::new();
    for (s, e) in spans {
        d.push(e - s);
    }
    // insertion sort, deliberately naive
    for i in 1..d.len() {
        let mut j = i;
        while j > 0 && d[j - 1] > d[j] {
            d.swap(j - 1, j);
            j -= 1;
        }
    }
    let n = d.len();
    let mut total = 0;
    for x in &d {
        total += x;
    }
    let median = if n == 0 {
        None
    } else if n % 2 == 1 {
        Some(d[(n - 1) / 2] as f64)
    } else {
        Some((d[n / 2 - 1] + d[n / 2]) as f64 / 2.0)
    };
    let mut latency: Option<u64> = None;
    for (s, _) in spans {
        if latency.is_none() || *s < latency.unwrap() {
            latency = Some(*s);
        }
    }
    OracleTier {
        name: name.to_string(),
        count: n as u64,
        min: if n == 0 { None } else { Some(d[0]) },
        max: if n == 0 { None } else { Some(d[n - 1]) },
        avg: if n == 0 { None } else { Some(total as f64 / n as f64) },
        median,
        total,
        percentage: total as f64 * 100.0 / t as f64,
        latency,
    }
}

pub fn overall(spans: &[(u64, u64)], t: u64) -> OracleOverall {
    let mut covered_ms = vec![false; t as usize];
    let mut sum = 0;
    let mut latency: Option<u64> = None;
    for &(s, e) in spans {
        for ms in s..e {
            covered_ms[ms as usize] = true;
        }
        sum += e - s;
        latency = Some(latency.map_or(s, |l: u64| l.min(s)));
    }
    let covered = covered_ms.iter().filter(|c| **c).count() as u64;
    let n = spans.len() as u64;
    OracleOverall {
        occurrences: n,
        frequency_per_min: n as f64 * 60_000.0 / t as f64,
        average_duration_ms: if n == 0 { 0.0 } else { sum as f64 / n as f64 },
        time_ratio: covered as f64 / t as f64,
        latency,
        covered,
    }
}

/// Oracle results for a whole project, optionally skipping transcript tiers.
pub fn project_stats(p: &Project, include_transcript: bool) -> (OracleOverall, Vec<OracleTier>) {
    let mut all = Vec::new();
    let mut tiers = Vec::new();
    for t in &p.tiers {
        if !include_transcript && t.kind == TierKind::Transcript {
            continue;
        }
        let spans: Vec<(u64, u64)> = t.annotations.iter().map(|a| (a.start_ms, a.end_ms)).collect();
        all.extend_from_slice(&spans);
        tiers.push(tier_stats(&t.name, &spans, p.observation_ms));
    }
    (overall(&all, p.observation_ms), tiers)
}

/// Relative error check used by every float comparison against the oracle.
pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

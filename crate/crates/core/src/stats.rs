//! Annotation statistics: five overall metrics and eight per tier.
//!
//! All durations are in milliseconds on the project timeline. Per-tier
//! percentages use the plain sum of durations (annotations in a tier never
//! overlap); the overall time ratio uses the union of intervals across tiers
//! so it stays a proportion even when tiers overlap each other.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{Project, Tier, TierKind};
use crate::exec::Exec;

pub const STATS_CSV_HEADER: [&str; 10] = [
    "scope",
    "count",
    "frequency_per_min",
    "min_ms",
    "max_ms",
    "avg_ms",
    "median_ms",
    "total_ms",
    "percentage",
    "latency_ms",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("observation window must be longer than 0 ms")]
    EmptyWindow,
}

/// The observation period T the metrics are normalized against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    t_ms: u64,
}

impl ObservationWindow {
    pub fn new(t_ms: u64) -> Result<Self, StatsError> {
        if t_ms == 0 {
            return Err(StatsError::EmptyWindow);
        }
        Ok(ObservationWindow { t_ms })
    }

    pub fn for_project(project: &Project) -> Result<Self, StatsError> {
        ObservationWindow::new(project.observation_ms)
    }

    pub fn t_ms(self) -> u64 {
        self.t_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierStats {
    pub count: u64,
    pub min_duration_ms: Option<u64>,
    pub max_duration_ms: Option<u64>,
    pub average_duration_ms: Option<f64>,
    pub median_duration_ms: Option<f64>,
    pub total_duration_ms: u64,
    pub duration_percentage: f64,
    pub latency_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallStats {
    pub occurrences: u64,
    pub frequency_per_min: f64,
    pub average_duration_ms: f64,
    pub time_ratio: f64,
    pub latency_ms: Option<u64>,
    /// Length of the union of all annotation intervals.
    pub covered_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTierStats {
    pub tier: String,
    #[serde(flatten)]
    pub stats: TierStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub observation_ms: u64,
    pub overall: OverallStats,
    /// In project tier order.
    pub tiers: Vec<NamedTierStats>,
}

pub fn compute_tier(tier: &Tier, window: ObservationWindow) -> TierStats {
    let mut d: Vec<u64> = tier.annotations.iter().map(|a| a.duration_ms()).collect();
    d.sort_unstable();
    let n = d.len();
    let total: u64 = d.iter().sum();
    let median = match n {
        0 => None,
        _ if n % 2 == 1 => Some(d[n / 2] as f64),
        _ => Some((d[n / 2 - 1] as f64 + d[n / 2] as f64) / 2.0),
    };
    TierStats {
        count: n as u64,
        min_duration_ms: d.first().copied(),
        max_duration_ms: d.last().copied(),
        average_duration_ms: (n > 0).then(|| total as f64 / n as f64),
        median_duration_ms: median,
        total_duration_ms: total,
        duration_percentage: 100.0 * total as f64 / window.t_ms as f64,
        latency_ms: tier.annotations.iter().map(|a| a.start_ms).min(),
    }
}

/// Total length of the union of `[start, end)` intervals.
pub fn union_length(mut intervals: Vec<(u64, u64)>) -> u64 {
    intervals.sort_unstable();
    let mut covered = 0;
    let mut current: Option<(u64, u64)> = None;
    for (s, e) in intervals {
        match current {
            Some((cs, ce)) if s <= ce => current = Some((cs, ce.max(e))),
            _ => {
                if let Some((cs, ce)) = current {
                    covered += ce - cs;
                }
                current = Some((s, e));
            }
        }
    }
    covered + current.map_or(0, |(s, e)| e - s)
}

fn included<'p>(project: &'p Project, include_transcript: bool) -> impl Iterator<Item = &'p Tier> {
    project
        .tiers
        .iter()
        .filter(move |t| include_transcript || t.kind != TierKind::Transcript)
}

pub fn compute_overall(project: &Project, window: ObservationWindow, include_transcript: bool) -> OverallStats {
    let intervals: Vec<(u64, u64)> = included(project, include_transcript)
        .flat_map(|t| t.annotations.iter().map(|a| (a.start_ms, a.end_ms)))
        .collect();
    let n = intervals.len() as u64;
    let sum: u64 = intervals.iter().map(|(s, e)| e - s).sum();
    let latency = intervals.iter().map(|(s, _)| *s).min();
    let covered = union_length(intervals);
    let t = window.t_ms as f64;
    OverallStats {
        occurrences: n,
        frequency_per_min: n as f64 / (t / 60_000.0),
        average_duration_ms: if n == 0 { 0.0 } else { sum as f64 / n as f64 },
        time_ratio: covered as f64 / t,
        latency_ms: latency,
        covered_ms: covered,
    }
}

pub fn compute_summary(
    project: &Project,
    window: ObservationWindow,
    include_transcript: bool,
    exec: Exec,
) -> StatsSummary {
    let tiers: Vec<&Tier> = included(project, include_transcript).collect();
    let per_tier = exec.map(&tiers, |t| NamedTierStats {
        tier: t.name.clone(),
        stats: compute_tier(t, window),
    });
    StatsSummary {
        observation_ms: window.t_ms,
        overall: compute_overall(project, window, include_transcript),
        tiers: per_tier,
    }
}

pub fn export_stats_json(summary: &StatsSummary) -> String {
    serde_json::to_string_pretty(summary).expect("stats serialize")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per tier plus a leading `OVERALL` row. The overall row carries
/// the union coverage in `total_ms` and `100 × time_ratio` in `percentage`.
pub fn export_stats_csv(summary: &StatsSummary) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(STATS_CSV_HEADER).expect("in-memory write");
    let o = &summary.overall;
    w.write_record([
        "OVERALL".to_string(),
        o.occurrences.to_string(),
        o.frequency_per_min.to_string(),
        String::new(),
        String::new(),
        o.average_duration_ms.to_string(),
        String::new(),
        o.covered_ms.to_string(),
        (100.0 * o.time_ratio).to_string(),
        opt(o.latency_ms),
    ])
    .expect("in-memory write");
    for t in &summary.tiers {
        let s = &t.stats;
        w.write_record([
            t.tier.clone(),
            s.count.to_string(),
            String::new(),
            opt(s.min_duration_ms),
            opt(s.max_duration_ms),
            opt(s.average_duration_ms),
            opt(s.median_duration_ms),
            s.total_duration_ms.to_string(),
            s.duration_percentage.to_string(),
            opt(s.latency_ms),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tier(name: &str, spans: &[(u64, u64)]) -> Tier {
        let mut p = Project::new("b", 10_000);
        p.create_tier(name, TierKind::FreeText, None, &Vec::new()).unwrap();
        for &(s, e) in spans {
            p.add_annotation(name, s, e, "v", &Vec::new()).unwrap();
        }
        p.tiers.remove(0)
    }

    #[test]
    fn window_must_be_positive() {
        assert_eq!(ObservationWindow::new(0), Err(StatsError::EmptyWindow));
    }

    #[test]
    fn boundary_tiers() {
        let w = ObservationWindow::new(10_000).unwrap();
        let empty = compute_tier(&tier("e", &[]), w);
        assert_eq!((empty.count, empty.total_duration_ms, empty.latency_ms), (0, 0, None));
        assert_eq!(empty.duration_percentage, 0.0);
        let full = compute_tier(&tier("f", &[(0, 10_000)]), w);
        assert_eq!((full.duration_percentage, full.latency_ms), (100.0, Some(0)));
    }

    #[test]
    fn union_merges_touching_and_nested() {
        assert_eq!(union_length(vec![(0, 10), (10, 20), (2, 5), (30, 31)]), 21);
        assert_eq!(union_length(vec![]), 0);
    }

    #[test]
    fn csv_rows() {
        let mut p = Project::new("b", 10_000);
        let s = compute_summary(&p, ObservationWindow::new(10_000).unwrap(), true, Exec::Sequential);
        let csv = export_stats_csv(&s);
        assert_eq!(csv.lines().nth(1).unwrap(), "OVERALL,0,0,,,0,,0,0,");
        p.create_tier("A", TierKind::FreeText, None, &Vec::new()).unwrap();
        p.create_tier("B", TierKind::FreeText, None, &Vec::new()).unwrap();
        let s = compute_summary(&p, ObservationWindow::new(10_000).unwrap(), true, Exec::Sequential);
        assert_eq!(export_stats_csv(&s).lines().count(), 4);
    }
}

use proptest::prelude::*;
use rosann_core::annotation::{Project, TierKind};
use rosann_core::stats::{
    compute_overall, compute_summary, compute_tier, export_stats_csv, export_stats_json, ObservationWindow,
    StatsSummary, STATS_CSV_HEADER,
};
use rosann_core::Exec;
use rosann_testkit::csv_oracle;
use rosann_testkit::stats_oracle::{self, close};
use rosann_testkit::tiers::random_project;

fn project(t: u64, tiers: &[(&str, &[(u64, u64)])]) -> Project {
    let mut p = Project::new("b", t);
    for (name, spans) in tiers {
        p.create_tier(name, TierKind::FreeText, None, &Vec::new()).unwrap();
        for &(s, e) in *spans {
            p.add_annotation(name, s, e, "v", &Vec::new()).unwrap();
        }
    }
    p
}

fn window(t: u64) -> ObservationWindow {
    ObservationWindow::new(t).unwrap()
}

#[test]
fn worked_tier_case() {
    let p = project(10_000, &[("G", &[(1000, 2000), (4000, 7000)])]);
    let s = compute_tier(&p.tiers[0], window(10_000));
    assert_eq!(s.count, 2);
    assert_eq!(s.min_duration_ms, Some(1000));
    assert_eq!(s.max_duration_ms, Some(3000));
    assert_eq!(s.average_duration_ms, Some(2000.0));
    assert_eq!(s.median_duration_ms, Some(2000.0));
    assert_eq!(s.total_duration_ms, 4000);
    assert_eq!(s.duration_percentage, 40.0);
    assert_eq!(s.latency_ms, Some(1000));
}

#[test]
fn worked_overall_case() {
    let p = project(10_000, &[("A", &[(0, 5000)]), ("B", &[(4000, 6000)])]);
    let o = compute_overall(&p, window(10_000), true);
    assert_eq!(o.occurrences, 2);
    assert_eq!(o.covered_ms, 6000);
    assert_eq!(o.time_ratio, 0.6);
    assert_eq!(o.latency_ms, Some(0));
    assert!(close(o.frequency_per_min, 12.0));
    // mean of the two durations (5000, 2000), not covered time / count
    assert_eq!(o.average_duration_ms, 3500.0);
}

#[test]
fn empty_project() {
    let o = compute_overall(&Project::new("b", 10_000), window(10_000), true);
    assert_eq!((o.occurrences, o.frequency_per_min, o.time_ratio, o.latency_ms), (0, 0.0, 0.0, None));
}

#[test]
fn even_median_averages_middle_pair() {
    let p = project(100, &[("G", &[(0, 1), (10, 14), (20, 27), (30, 40)])]);
    assert_eq!(compute_tier(&p.tiers[0], window(100)).median_duration_ms, Some(5.5));
}

fn check_against_oracle(p: &Project, include_transcript: bool, exec: Exec) {
    let s = compute_summary(p, window(p.observation_ms), include_transcript, exec);
    let (o, tiers) = stats_oracle::project_stats(p, include_transcript);
    assert_eq!(s.overall.occurrences, o.occurrences);
    assert_eq!(s.overall.latency_ms, o.latency);
    assert_eq!(s.overall.covered_ms, o.covered);
    assert!(close(s.overall.frequency_per_min, o.frequency_per_min));
    assert!(close(s.overall.average_duration_ms, o.average_duration_ms));
    assert!(close(s.overall.time_ratio, o.time_ratio));
    assert_eq!(s.tiers.len(), tiers.len());
    for (got, want) in s.tiers.iter().zip(&tiers) {
        let g = &got.stats;
        assert_eq!(got.tier, want.name);
        assert_eq!((g.count, g.min_duration_ms, g.max_duration_ms), (want.count, want.min, want.max));
        assert_eq!((g.total_duration_ms, g.latency_ms), (want.total, want.latency));
        assert!(close(g.duration_percentage, want.percentage));
        for (a, b) in [(g.average_duration_ms, want.avg), (g.median_duration_ms, want.median)] {
            assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                assert!(close(a, b), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn hundred_random_projects_match_brute_force_oracle() {
    for seed in 0..100 {
        let (p, _) = random_project(seed);
        check_against_oracle(&p, true, Exec::Parallel);
        check_against_oracle(&p, false, Exec::Sequential);
    }
}

#[test]
fn transcript_tiers_can_be_excluded() {
    let mut p = project(10_000, &[("A", &[(0, 100)])]);
    p.create_tier("S", TierKind::Transcript, None, &Vec::new()).unwrap();
    p.add_annotation("S", 200, 400, "hi", &Vec::new()).unwrap();
    let with = compute_summary(&p, window(10_000), true, Exec::Sequential);
    let without = compute_summary(&p, window(10_000), false, Exec::Sequential);
    assert_eq!((with.overall.occurrences, with.tiers.len()), (2, 2));
    assert_eq!((without.overall.occurrences, without.tiers.len()), (1, 1));
}

#[test]
fn json_export_round_trips() {
    let (p, _) = random_project(11);
    let s = compute_summary(&p, window(p.observation_ms), true, Exec::Sequential);
    let back: StatsSummary = serde_json::from_str(&export_stats_json(&s)).unwrap();
    assert_eq!(back, s);
}

#[test]
fn csv_export_shape() {
    let p = project(10_000, &[("A", &[(1000, 2000), (4000, 7000)]), ("B, b", &[])]);
    let s = compute_summary(&p, window(10_000), true, Exec::Sequential);
    let rows = csv_oracle::parse(&export_stats_csv(&s)).unwrap();
    assert_eq!(rows[0], STATS_CSV_HEADER);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][0], "OVERALL");
    assert_eq!(rows[2], ["A", "2", "", "1000", "3000", "2000", "2000", "4000", "40", "1000"]);
    assert_eq!(rows[3], ["B, b", "0", "", "", "", "", "", "0", "0", ""]);
}

fn spans() -> impl Strategy<Value = Vec<Vec<(u64, u64)>>> {
    let tier = prop::collection::vec((0u64..9_000, 1u64..1000), 0..12);
    prop::collection::vec(tier, 1..4)
}

fn build(t: u64, raw: &[Vec<(u64, u64)>]) -> Project {
    let mut p = Project::new("b", t);
    for (k, tier) in raw.iter().enumerate() {
        let name = format!("T{k}");
        p.create_tier(&name, TierKind::FreeText, None, &Vec::new()).unwrap();
        for &(s, d) in tier {
            // overlapping picks are simply rejected
            let _ = p.add_annotation(&name, s, (s + d).min(t), "v", &Vec::new());
        }
    }
    p
}

proptest! {
    #[test]
    fn bounds_and_sums(raw in spans()) {
        let p = build(10_000, &raw);
        let s = compute_summary(&p, window(10_000), true, Exec::Sequential);
        prop_assert!((0.0..=1.0).contains(&s.overall.time_ratio));
        prop_assert_eq!(s.tiers.iter().map(|t| t.stats.count).sum::<u64>(), s.overall.occurrences);
        prop_assert_eq!(s.tiers.iter().filter_map(|t| t.stats.latency_ms).min(), s.overall.latency_ms);
        for t in &s.tiers {
            prop_assert!((0.0..=100.0).contains(&t.stats.duration_percentage));
            if let (Some(lo), Some(m), Some(hi)) = (t.stats.min_duration_ms, t.stats.median_duration_ms, t.stats.max_duration_ms) {
                prop_assert!(lo as f64 <= m && m <= hi as f64);
            }
        }
    }

    #[test]
    fn single_tier_ratio_equals_percentage(raw in prop::collection::vec((0u64..9_000, 1u64..1000), 0..20)) {
        let p = build(10_000, &[raw]);
        let o = compute_overall(&p, window(10_000), true);
        let t = compute_tier(&p.tiers[0], window(10_000));
        prop_assert!(close(o.time_ratio * 100.0, t.duration_percentage));
    }

    #[test]
    fn adding_never_decreases(raw in spans(), extra in (0u64..9_000, 1u64..1000)) {
        let mut p = build(10_000, &raw);
        let before = compute_summary(&p, window(10_000), true, Exec::Sequential);
        let name = p.tiers[0].name.clone();
        if p.add_annotation(&name, extra.0, extra.0 + extra.1, "v", &Vec::new()).is_ok() {
            let after = compute_summary(&p, window(10_000), true, Exec::Sequential);
            prop_assert!(after.overall.occurrences > before.overall.occurrences);
            prop_assert!(after.overall.time_ratio >= before.overall.time_ratio);
            prop_assert!(after.tiers[0].stats.total_duration_ms > before.tiers[0].stats.total_duration_ms);
        }
    }
}

use std::collections::HashMap;

use proptest::prelude::*;
use rosann_core::annotation::{
    export_csv, load_project, save_project, save_project_to, AnnotationError, Booklist, Project, ProjectStore, TierKind,
};
use rosann_core::layout::DataDir;
use rosann_core::media::TranscriptSegment;
use rosann_testkit::csv_oracle;
use rosann_testkit::tiers::{project_rows, random_project, run_integrity, Row};

#[test]
fn ten_thousand_random_edits_keep_tiers_intact() {
    let report = run_integrity(7, 10_000).unwrap();
    assert_eq!(report.accepted + report.rejected, 10_000);
    assert!(report.accepted > 1000 && report.rejected > 1000, "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn random_edit_sequences_agree_with_model(seed in any::<u64>()) {
        prop_assert!(run_integrity(seed, 500).is_ok());
    }
}

fn csv_rows(csv: &str) -> Vec<Row> {
    let rows = csv_oracle::parse(csv).unwrap();
    assert_eq!(rows[0], ["tier", "content", "start_time", "end_time"]);
    let mut out: Vec<Row> = rows[1..]
        .iter()
        .map(|r| {
            assert_eq!(r.len(), 4);
            (
                r[0].clone(),
                r[1].clone(),
                csv_oracle::parse_timestamp(&r[2]).unwrap(),
                csv_oracle::parse_timestamp(&r[3]).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn save_load_identity_on_100_projects() {
    let tmp = tempfile::tempdir().unwrap();
    let data = DataDir::init(tmp.path()).unwrap();
    for seed in 0..100 {
        let (p, _) = random_project(seed);
        let path = save_project(&data, &p).unwrap();
        assert_eq!(load_project(&path).unwrap(), p, "seed {seed}");
    }
}

#[test]
fn csv_reparses_to_same_multiset() {
    for seed in 0..100 {
        let (p, _) = random_project(seed);
        let csv = export_csv(&p);
        let rows = csv_rows(&csv);
        assert_eq!(rows.len(), p.annotation_count());
        assert_eq!(rows, project_rows(&p), "seed {seed}");
    }
}

#[test]
fn csv_row_order_is_tier_then_start() {
    let (p, _) = random_project(3);
    let parsed = csv_oracle::parse(&export_csv(&p)).unwrap();
    let keys: Vec<(String, u64)> = parsed[1..]
        .iter()
        .map(|r| (r[0].clone(), csv_oracle::parse_timestamp(&r[2]).unwrap()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

fn corrupt(project_json: &str, f: impl FnOnce(&mut serde_json::Value)) -> Result<Project, AnnotationError> {
    let tmp = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(project_json).unwrap();
    f(&mut v);
    let path = tmp.path().join("p.json");
    std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
    load_project(&path)
}

#[test]
fn corrupt_files_are_rejected() {
    let mut p = Project::new("b", 10_000);
    p.create_tier("Gaze", TierKind::FreeText, None, &Vec::new()).unwrap();
    p.add_annotation("Gaze", 0, 1000, "x", &Vec::new()).unwrap();
    p.add_annotation("Gaze", 2000, 3000, "y", &Vec::new()).unwrap();
    let json = serde_json::to_string(&p).unwrap();

    let r = corrupt(&json, |v| v["tiers"][0]["annotations"][1]["start_ms"] = 500.into());
    assert!(matches!(r, Err(AnnotationError::InvariantViolation { tier, .. }) if tier == "Gaze"));
    let r = corrupt(&json, |v| v["version"] = 99.into());
    assert!(matches!(r, Err(AnnotationError::SchemaVersionMismatch { found: 99, .. })));
    let r = corrupt(&json, |v| v["tiers"][0]["annotations"][0]["end_ms"] = 20_000.into());
    assert!(matches!(r, Err(AnnotationError::InvariantViolation { .. })));
    let r = corrupt(&json, |v| v["tiers"][0]["annotations"][1]["id"] = "a1".into());
    assert!(matches!(r, Err(AnnotationError::InvariantViolation { .. })));
}

#[test]
fn unsaveable_project_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let mut p = Project::new("b", 100);
    p.create_tier("T", TierKind::FreeText, None, &Vec::new()).unwrap();
    p.add_annotation("T", 0, 10, "x", &Vec::new()).unwrap();
    p.tiers[0].annotations[0].end_ms = 500;
    let path = tmp.path().join("p.json");
    assert!(save_project_to(&path, &p).is_err());
    assert!(!path.exists());
}

#[test]
fn transcript_import_two_speakers() {
    let segs = vec![
        TranscriptSegment {
            speaker: "Speaker 1".into(),
            start_ms: 0,
            end_ms: 2000,
            text: "hello".into(),
        },
        TranscriptSegment {
            speaker: "Speaker 2".into(),
            start_ms: 2000,
            end_ms: 3000,
            text: "hi".into(),
        },
    ];
    let mut p = Project::new("b", 10_000);
    p.import_transcript(&segs, false).unwrap();
    assert_eq!(p.tiers.len(), 2);
    for (tier, seg) in p.tiers.iter().zip(&segs) {
        assert_eq!(tier.name, seg.speaker);
        assert_eq!(tier.kind, TierKind::Transcript);
        let a = &tier.annotations[0];
        assert_eq!((a.start_ms, a.end_ms, a.value.as_str()), (seg.start_ms, seg.end_ms, seg.text.as_str()));
    }
    // transcript annotations can be pruned like any other
    let id = p.tiers[0].annotations[0].id.clone();
    p.delete_annotation(&id).unwrap();
}

#[test]
fn codebook_binding_survives_booklist_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let list = Booklist::new(tmp.path());
    list.save(&rosann_testkit::tiers::codebook()).unwrap();
    let mut p = Project::new("b", 10_000);
    p.create_tier("Gestures", TierKind::Codebook, Some("gesture-codes"), &list)
        .unwrap();
    p.add_annotation("Gestures", 0, 10, "wave", &list).unwrap();
    assert!(matches!(
        p.add_annotation("Gestures", 10, 20, "shrug", &list),
        Err(AnnotationError::CodeNotInCodebook { .. })
    ));
}

#[test]
fn store_serializes_concurrent_writers() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("p.json");
    let store = ProjectStore::open(&path, || Project::new("b", 1_000_000)).unwrap();
    store
        .update(|p| p.create_tier("T", TierKind::FreeText, None, &Vec::new()).map(|_| ()))
        .unwrap();
    std::thread::scope(|s| {
        for k in 0..8u64 {
            let store = &store;
            s.spawn(move || {
                for i in 0..25u64 {
                    let start = (k * 25 + i) * 100;
                    store
                        .update(|p| p.add_annotation("T", start, start + 100, "x", &Vec::new()))
                        .unwrap();
                }
            });
        }
    });
    let snap = store.snapshot();
    assert_eq!(snap.annotation_count(), 200);
    let ids: HashMap<&str, ()> = snap.tiers[0].annotations.iter().map(|a| (a.id.as_str(), ())).collect();
    assert_eq!(ids.len(), 200);
    assert_eq!(load_project(&path).unwrap(), *snap);
}

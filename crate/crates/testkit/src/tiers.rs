//! Brute-force model of tier semantics and random project generation.
//!
//! The model keeps each tier as an unsorted list and decides admissibility
//! by checking every pair, so it shares nothing with the sorted-insert and
//! binary-search logic in `rosann-core`.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rosann_core::annotation::{AnnotationPatch, Codebook, Project, TierKind};

const CODES: [&str; 4] = ["point", "wave", "nod", "gaze"];
const WORDS: [&str; 8] = ["hello", "a, b", "quote \"x\"", "two\nlines", "ünï", "", " pad ", "robot"];

/// Flat record used for multiset comparisons.
pub type Row = (String, String, u64, u64);

#[derive(Debug, Clone)]
struct ModelItem {
    id: String,
    start: u64,
    end: u64,
    value: String,
}

#[derive(Debug, Clone)]
struct ModelTier {
    name: String,
    codes: Option<Vec<String>>,
    items: Vec<ModelItem>,
}

/// Reference model of a project.
#[derive(Debug, Clone)]
pub struct Model {
    observation_ms: u64,
    tiers: Vec<ModelTier>,
}

impl Model {
    fn admits(&self, tier: usize, start: u64, end: u64, value: &str, except: Option<&str>) -> bool {
        let t = &self.tiers[tier];
        if !(start < end && end <= self.observation_ms) {
            return false;
        }
        if let Some(codes) = &t.codes {
            if !codes.iter().any(|c| c == value) {
                return false;
            }
        }
        t.items
            .iter()
            .filter(|i| Some(i.id.as_str()) != except)
            .all(|i| i.end <= start || end <= i.start)
    }

    pub fn rows(&self) -> Vec<Row> {
        let mut rows: Vec<Row> = self
            .tiers
            .iter()
            .flat_map(|t| t.items.iter().map(|i| (t.name.clone(), i.value.clone(), i.start, i.end)))
            .collect();
        rows.sort();
        rows
    }
}

pub fn project_rows(p: &Project) -> Vec<Row> {
    let mut rows: Vec<Row> = p
        .tiers
        .iter()
        .flat_map(|t| {
            t.annotations
                .iter()
                .map(|a| (t.name.clone(), a.value.clone(), a.start_ms, a.end_ms))
        })
        .collect();
    rows.sort();
    rows
}

/// Checks sortedness, pairwise non-overlap and bounds by exhaustive pair
/// comparison.
pub fn check_integrity(p: &Project) -> Result<(), String> {
    for t in &p.tiers {
        let a = &t.annotations;
        for (i, x) in a.iter().enumerate() {
            if x.start_ms >= x.end_ms || x.end_ms > p.observation_ms {
                return Err(format!("{}: {} out of range", t.name, x.id));
            }
            for (j, y) in a.iter().enumerate() {
                if i < j && x.start_ms > y.start_ms {
                    return Err(format!("{}: {} after {} but starts later", t.name, x.id, y.id));
                }
                if i != j && x.start_ms < y.end_ms && y.start_ms < x.end_ms {
                    return Err(format!("{}: {} overlaps {}", t.name, x.id, y.id));
                }
            }
        }
    }
    Ok(())
}

pub fn codebook() -> Codebook {
    let mut b = Codebook::new("gesture-codes");
    for c in CODES {
        b.add_code(c, "", None).unwrap();
    }
    b
}

/// A project with one free-text and one codebook tier, plus the matching
/// model.
fn start(observation_ms: u64, books: &Vec<Codebook>) -> (Project, Model) {
    let mut p = Project::new("integrity", observation_ms);
    p.create_tier("Free", TierKind::FreeText, None, books).unwrap();
    p.create_tier("Gestures", TierKind::Codebook, Some("gesture-codes"), books)
        .unwrap();
    let m = Model {
        observation_ms,
        tiers: vec![
            ModelTier {
                name: "Free".into(),
                codes: None,
                items: Vec::new(),
            },
            ModelTier {
                name: "Gestures".into(),
                codes: Some(CODES.iter().map(|c| c.to_string()).collect()),
                items: Vec::new(),
            },
        ],
    };
    (p, m)
}

fn random_value(rng: &mut StdRng) -> String {
    // mostly codes so codebook inserts succeed often enough
    if rng.random_bool(0.7) {
        CODES[rng.random_range(0..CODES.len())].to_string()
    } else {
        WORDS[rng.random_range(0..WORDS.len())].to_string()
    }
}

fn random_span(rng: &mut StdRng, t: u64) -> (u64, u64) {
    let s = rng.random_range(0..=t);
    let e = if rng.random_bool(0.05) {
        rng.random_range(0..=t + 10)
    } else {
        s + rng.random_range(0..=t / 8)
    };
    (s, e)
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct IntegrityReport {
    pub steps: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub final_annotations: usize,
}

/// Runs `steps` random insert/update/delete operations against both the
/// project and the model, checking after every step that they agree on
/// acceptance and that every tier invariant holds.
pub fn run_integrity(seed: u64, steps: usize) -> Result<IntegrityReport, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let books = vec![codebook()];
    let t = 60_000;
    let (mut p, mut m) = start(t, &books);
    let mut report = IntegrityReport {
        steps,
        ..Default::default()
    };
    for step in 0..steps {
        let ids: Vec<(usize, String)> = m
            .tiers
            .iter()
            .enumerate()
            .flat_map(|(ti, tier)| tier.items.iter().map(move |i| (ti, i.id.clone())))
            .collect();
        let roll = rng.random_range(0..10);
        let (ok, expected) = if roll < 5 || ids.is_empty() {
            let ti = rng.random_range(0..m.tiers.len());
            let (s, e) = random_span(&mut rng, t);
            let v = random_value(&mut rng);
            let expected = m.admits(ti, s, e, &v, None);
            match p.add_annotation(&m.tiers[ti].name.clone(), s, e, &v, &books) {
                Ok(a) => {
                    m.tiers[ti].items.push(ModelItem {
                        id: a.id,
                        start: s,
                        end: e,
                        value: v,
                    });
                    (true, expected)
                }
                Err(_) => (false, expected),
            }
        } else if roll < 8 {
            let (ti, id) = ids[rng.random_range(0..ids.len())].clone();
            let cur = m.tiers[ti].items.iter().find(|i| i.id == id).unwrap().clone();
            let target = if rng.random_bool(0.2) { rng.random_range(0..m.tiers.len()) } else { ti };
            let (s, e) = if rng.random_bool(0.5) {
                let shift = rng.random_range(0..2000) as i64 - 1000;
                let s = (cur.start as i64 + shift).max(0) as u64;
                (s, s + (cur.end - cur.start))
            } else {
                random_span(&mut rng, t)
            };
            let v = if rng.random_bool(0.3) { random_value(&mut rng) } else { cur.value.clone() };
            let expected = m.admits(target, s, e, &v, Some(&id));
            let patch = AnnotationPatch {
                start_ms: Some(s),
                end_ms: Some(e),
                value: Some(v.clone()),
                tier: Some(m.tiers[target].name.clone()),
            };
            match p.update_annotation(&id, &patch, &books) {
                Ok(_) => {
                    m.tiers[ti].items.retain(|i| i.id != id);
                    m.tiers[target].items.push(ModelItem {
                        id,
                        start: s,
                        end: e,
                        value: v,
                    });
                    (true, expected)
                }
                Err(_) => (false, expected),
            }
        } else {
            let (ti, id) = ids[rng.random_range(0..ids.len())].clone();
            p.delete_annotation(&id).map_err(|e| format!("step {step}: delete {id}: {e}"))?;
            m.tiers[ti].items.retain(|i| i.id != id);
            (true, true)
        };
        if ok != expected {
            return Err(format!("step {step}: project accepted={ok}, model accepted={expected}"));
        }
        if ok {
            report.accepted += 1;
        } else {
            report.rejected += 1;
        }
        check_integrity(&p).map_err(|e| format!("step {step}: {e}"))?;
    }
    if project_rows(&p) != m.rows() {
        return Err("final project differs from model".into());
    }
    report.final_annotations = p.annotation_count();
    Ok(report)
}

/// A random valid project: 0–5 tiers of mixed kinds, values drawn from
/// awkward strings, annotations placed in free gaps.
pub fn random_project(seed: u64) -> (Project, Vec<Codebook>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let books = vec![codebook()];
    let t = rng.random_range(1..=3_600_000u64);
    let mut p = Project::new(format!("{seed:016x}"), t);
    let tiers = rng.random_range(0..=5);
    for k in 0..tiers {
        let kind = [TierKind::FreeText, TierKind::Codebook, TierKind::Transcript][rng.random_range(0..3)];
        let name = format!("{} {k}", ["Gaze", "Speech, robot", "Ünïcode \"q\""][rng.random_range(0..3)]);
        let cref = (kind == TierKind::Codebook).then_some("gesture-codes");
        p.create_tier(&name, kind, cref, &books).unwrap();
        let mut occupied: BTreeMap<u64, u64> = BTreeMap::new();
        for _ in 0..rng.random_range(0..40) {
            let s = rng.random_range(0..t);
            let e = rng.random_range(s + 1..=t.min(s + t / 4 + 1));
            if occupied.iter().any(|(&os, &oe)| os < e && s < oe) {
                continue;
            }
            let v = if kind == TierKind::Codebook {
                CODES[rng.random_range(0..CODES.len())].to_string()
            } else {
                WORDS[rng.random_range(0..WORDS.len())].to_string()
            };
            p.add_annotation(&name, s, e, &v, &books).unwrap();
            occupied.insert(s, e);
        }
    }
    (p, books)
}

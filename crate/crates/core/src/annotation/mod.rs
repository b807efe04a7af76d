//! The tiered annotation document.
//!
//! A [`Project`] belongs to one processed bag and holds named [`Tier`]s of
//! time-interval [`Annotation`]s on the bag's zero-based millisecond
//! timeline. Within a tier annotations are kept sorted and never overlap
//! (touching endpoints is fine); across tiers anything goes.

mod codebook;
mod export;
mod store;

use std::collections::HashSet;
use std::io;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::{write_atomic, DataDir};
use crate::media::TranscriptSegment;

pub use codebook::{Booklist, Code, Codebook, CodebookLookup, PALETTE};
pub use export::{export_csv, format_timestamp, CSV_HEADER};
pub use store::ProjectStore;

pub const PROJECT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("tier '{0}' already exists")]
    DuplicateTierName(String),
    #[error("unknown codebook '{0}'")]
    UnknownCodebook(String),
    #[error("unknown tier '{0}'")]
    UnknownTier(String),
    #[error("unknown annotation '{0}'")]
    UnknownAnnotation(String),
    #[error("overlaps annotation '{existing}' in tier '{tier}'")]
    Overlap { tier: String, existing: String },
    #[error("'{code}' is not a code in codebook '{codebook}'")]
    CodeNotInCodebook { code: String, codebook: String },
    #[error("interval {start_ms}-{end_ms} is outside 0-{observation_ms} or empty")]
    OutOfRange {
        start_ms: u64,
        end_ms: u64,
        observation_ms: u64,
    },
    #[error("{0}")]
    InvalidTier(String),
    #[error("project schema version {found}, expected {expected}")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("tier '{tier}' is corrupt: {reason}")]
    InvariantViolation { tier: String, reason: String },
    #[error("duplicate code '{0}'")]
    DuplicateCode(String),
    #[error("duplicate codebook: {0}")]
    DuplicateCodebook(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TierKind {
    Codebook,
    FreeText,
    Transcript,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TierOrigin {
    Manual,
    Llm,
    Transcript,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub value: String,
}

impl Annotation {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier {
    pub name: String,
    pub kind: TierKind,
    pub codebook_ref: Option<String>,
    pub origin: TierOrigin,
    pub annotations: Vec<Annotation>,
}

impl Tier {
    /// Annotation overlapping `[start, end)` other than `except`, if any.
    fn overlapping(&self, start: u64, end: u64, except: Option<&str>) -> Option<&Annotation> {
        // sorted and disjoint, so only the neighbours around `start` matter
        let i = self.annotations.partition_point(|a| a.end_ms <= start);
        self.annotations[i..]
            .iter()
            .take_while(|a| a.start_ms < end)
            .find(|a| Some(a.id.as_str()) != except)
    }

    fn insert_sorted(&mut self, a: Annotation) {
        let i = self
            .annotations
            .partition_point(|x| (x.start_ms, x.end_ms) <= (a.start_ms, a.end_ms));
        self.annotations.insert(i, a);
    }

    fn check(&self, observation_ms: u64) -> Result<(), String> {
        if self.kind == TierKind::Codebook && self.codebook_ref.is_none() {
            return Err("codebook tier without codebook_ref".into());
        }
        if self.kind != TierKind::Codebook && self.codebook_ref.is_some() {
            return Err("codebook_ref on a non-codebook tier".into());
        }
        for a in &self.annotations {
            if a.start_ms >= a.end_ms || a.end_ms > observation_ms {
                return Err(format!("annotation '{}' has bad bounds {}-{}", a.id, a.start_ms, a.end_ms));
            }
        }
        for w in self.annotations.windows(2) {
            if w[0].start_ms > w[1].start_ms {
                return Err(format!("annotations '{}' and '{}' out of order", w[0].id, w[1].id));
            }
            if w[0].end_ms > w[1].start_ms {
                return Err(format!("annotations '{}' and '{}' overlap", w[0].id, w[1].id));
            }
        }
        Ok(())
    }
}

/// Partial update for [`Project::update_annotation`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationPatch {
    pub start_ms: Option<u64>,
    pub end_ms: Option<u64>,
    pub value: Option<String>,
    pub tier: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub tiers: Vec<String>,
    pub imported: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub version: u32,
    pub bag_id: String,
    pub observation_ms: u64,
    pub tiers: Vec<Tier>,
    pub codebooks_used: Vec<String>,
    /// Counter behind annotation ids, so ids are never reused.
    pub next_id: u64,
}

impl Project {
    pub fn new(bag_id: impl Into<String>, observation_ms: u64) -> Project {
        Project {
            version: PROJECT_VERSION,
            bag_id: bag_id.into(),
            observation_ms,
            tiers: Vec::new(),
            codebooks_used: Vec::new(),
            next_id: 1,
        }
    }

    pub fn tier(&self, name: &str) -> Option<&Tier> {
        self.tiers.iter().find(|t| t.name == name)
    }

    fn tier_index(&self, name: &str) -> Result<usize, AnnotationError> {
        self.tiers
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| AnnotationError::UnknownTier(name.into()))
    }

    pub fn annotation_count(&self) -> usize {
        self.tiers.iter().map(|t| t.annotations.len()).sum()
    }

    /// (tier index, position) of an annotation.
    fn locate(&self, id: &str) -> Result<(usize, usize), AnnotationError> {
        self.tiers
            .iter()
            .enumerate()
            .find_map(|(ti, t)| t.annotations.iter().position(|a| a.id == id).map(|ai| (ti, ai)))
            .ok_or_else(|| AnnotationError::UnknownAnnotation(id.into()))
    }

    pub fn find_annotation(&self, id: &str) -> Option<(&Tier, &Annotation)> {
        let (ti, ai) = self.locate(id).ok()?;
        Some((&self.tiers[ti], &self.tiers[ti].annotations[ai]))
    }

    pub fn create_tier(
        &mut self,
        name: &str,
        kind: TierKind,
        codebook_ref: Option<&str>,
        books: &dyn CodebookLookup,
    ) -> Result<&Tier, AnnotationError> {
        self.create_tier_with_origin(name, kind, codebook_ref, TierOrigin::Manual, books)
    }

    pub fn create_tier_with_origin(
        &mut self,
        name: &str,
        kind: TierKind,
        codebook_ref: Option<&str>,
        origin: TierOrigin,
        books: &dyn CodebookLookup,
    ) -> Result<&Tier, AnnotationError> {
        if name.trim().is_empty() {
            return Err(AnnotationError::InvalidTier("tier name is empty".into()));
        }
        if self.tier(name).is_some() {
            return Err(AnnotationError::DuplicateTierName(name.into()));
        }
        let codebook_ref = match (kind, codebook_ref) {
            (TierKind::Codebook, Some(r)) => {
                books
                    .codebook(r)
                    .ok_or_else(|| AnnotationError::UnknownCodebook(r.into()))?;
                if !self.codebooks_used.iter().any(|c| c == r) {
                    self.codebooks_used.push(r.to_string());
                }
                Some(r.to_string())
            }
            (TierKind::Codebook, None) => return Err(AnnotationError::UnknownCodebook(String::new())),
            (_, Some(_)) => {
                return Err(AnnotationError::InvalidTier(
                    "codebook_ref is only allowed on codebook tiers".into(),
                ))
            }
            (_, None) => None,
        };
        self.tiers.push(Tier {
            name: name.to_string(),
            kind,
            codebook_ref,
            origin,
            annotations: Vec::new(),
        });
        Ok(self.tiers.last().unwrap())
    }

    pub fn delete_tier(&mut self, name: &str) -> Result<Tier, AnnotationError> {
        let i = self.tier_index(name)?;
        Ok(self.tiers.remove(i))
    }

    fn check_range(&self, start_ms: u64, end_ms: u64) -> Result<(), AnnotationError> {
        if start_ms >= end_ms || end_ms > self.observation_ms {
            return Err(AnnotationError::OutOfRange {
                start_ms,
                end_ms,
                observation_ms: self.observation_ms,
            });
        }
        Ok(())
    }

    fn check_value(&self, tier: &Tier, value: &str, books: &dyn CodebookLookup) -> Result<(), AnnotationError> {
        if tier.kind != TierKind::Codebook {
            return Ok(());
        }
        let name = tier.codebook_ref.as_deref().unwrap_or_default();
        let book = books
            .codebook(name)
            .ok_or_else(|| AnnotationError::UnknownCodebook(name.into()))?;
        if !book.contains(value) {
            return Err(AnnotationError::CodeNotInCodebook {
                code: value.into(),
                codebook: name.into(),
            });
        }
        Ok(())
    }

    fn check_overlap(&self, tier: &Tier, start: u64, end: u64, except: Option<&str>) -> Result<(), AnnotationError> {
        match tier.overlapping(start, end, except) {
            Some(a) => Err(AnnotationError::Overlap {
                tier: tier.name.clone(),
                existing: a.id.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn add_annotation(
        &mut self,
        tier: &str,
        start_ms: u64,
        end_ms: u64,
        value: &str,
        books: &dyn CodebookLookup,
    ) -> Result<Annotation, AnnotationError> {
        let ti = self.tier_index(tier)?;
        self.check_range(start_ms, end_ms)?;
        let t = &self.tiers[ti];
        self.check_value(t, value, books)?;
        self.check_overlap(t, start_ms, end_ms, None)?;
        let a = Annotation {
            id: format!("a{}", self.next_id),
            start_ms,
            end_ms,
            value: value.to_string(),
        };
        self.next_id += 1;
        self.tiers[ti].insert_sorted(a.clone());
        Ok(a)
    }

    pub fn update_annotation(
        &mut self,
        id: &str,
        patch: &AnnotationPatch,
        books: &dyn CodebookLookup,
    ) -> Result<Annotation, AnnotationError> {
        let (ti, ai) = self.locate(id)?;
        let current = &self.tiers[ti].annotations[ai];
        let start_ms = patch.start_ms.unwrap_or(current.start_ms);
        let end_ms = patch.end_ms.unwrap_or(current.end_ms);
        let value = patch.value.clone().unwrap_or_else(|| current.value.clone());
        let target = match &patch.tier {
            Some(name) => self.tier_index(name)?,
            None => ti,
        };
        self.check_range(start_ms, end_ms)?;
        let t = &self.tiers[target];
        self.check_value(t, &value, books)?;
        self.check_overlap(t, start_ms, end_ms, Some(id))?;
        let updated = Annotation {
            id: id.to_string(),
            start_ms,
            end_ms,
            value,
        };
        self.tiers[ti].annotations.remove(ai);
        self.tiers[target].insert_sorted(updated.clone());
        Ok(updated)
    }

    pub fn delete_annotation(&mut self, id: &str) -> Result<Annotation, AnnotationError> {
        let (ti, ai) = self.locate(id)?;
        Ok(self.tiers[ti].annotations.remove(ai))
    }

    /// One transcript tier per speaker, in order of first appearance.
    /// Segments are clamped to the observation window; with `replace`,
    /// existing tiers of the same names are dropped first.
    pub fn import_transcript(
        &mut self,
        segments: &[TranscriptSegment],
        replace: bool,
    ) -> Result<ImportReport, AnnotationError> {
        let mut speakers: Vec<&str> = Vec::new();
        for s in segments {
            if !speakers.contains(&s.speaker.as_str()) {
                speakers.push(&s.speaker);
            }
        }
        for name in &speakers {
            if self.tier(name).is_some() && !replace {
                return Err(AnnotationError::DuplicateTierName(name.to_string()));
            }
        }
        self.tiers.retain(|t| !speakers.contains(&t.name.as_str()));
        let mut report = ImportReport::default();
        for name in &speakers {
            self.tiers.push(Tier {
                name: name.to_string(),
                kind: TierKind::Transcript,
                codebook_ref: None,
                origin: TierOrigin::Transcript,
                annotations: Vec::new(),
            });
            report.tiers.push(name.to_string());
        }
        for s in segments {
            let end = s.end_ms.min(self.observation_ms);
            let start = s.start_ms.min(end);
            if (start, end) != (s.start_ms, s.end_ms) {
                report.warnings.push(format!(
                    "{}: segment {}-{} clamped to {start}-{end}",
                    s.speaker, s.start_ms, s.end_ms
                ));
            }
            let ti = self.tier_index(&s.speaker)?;
            let result = self
                .check_range(start, end)
                .and_then(|_| self.check_overlap(&self.tiers[ti], start, end, None));
            if let Err(e) = result {
                report.warnings.push(format!("{}: segment {}-{} skipped: {e}", s.speaker, s.start_ms, s.end_ms));
                continue;
            }
            let a = Annotation {
                id: format!("a{}", self.next_id),
                start_ms: start,
                end_ms: end,
                value: s.text.clone(),
            };
            self.next_id += 1;
            self.tiers[ti].insert_sorted(a);
            report.imported += 1;
        }
        for w in &report.warnings {
            warn!("{w}");
        }
        Ok(report)
    }

    /// Checks every structural invariant; used on load.
    pub fn validate(&self) -> Result<(), AnnotationError> {
        let mut names = HashSet::new();
        let mut ids = HashSet::new();
        for t in &self.tiers {
            let violation = |reason: String| AnnotationError::InvariantViolation {
                tier: t.name.clone(),
                reason,
            };
            if !names.insert(t.name.as_str()) {
                return Err(violation("duplicate tier name".into()));
            }
            t.check(self.observation_ms).map_err(violation)?;
            for a in &t.annotations {
                if !ids.insert(a.id.as_str()) {
                    return Err(violation(format!("duplicate annotation id '{}'", a.id)));
                }
            }
        }
        Ok(())
    }
}

pub fn save_project_to(path: &Path, project: &Project) -> Result<(), AnnotationError> {
    project.validate()?;
    let json = serde_json::to_vec_pretty(project).map_err(|e| AnnotationError::Parse(e.to_string()))?;
    write_atomic(path, &json)?;
    Ok(())
}

/// Saves to `annotation/<bag_id>.json`.
pub fn save_project(data: &DataDir, project: &Project) -> Result<PathBuf, AnnotationError> {
    let path = data.project_path(&project.bag_id);
    save_project_to(&path, project)?;
    Ok(path)
}

pub fn load_project(path: &Path) -> Result<Project, AnnotationError> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| AnnotationError::Parse(e.to_string()))?;
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if version != PROJECT_VERSION as u64 {
        return Err(AnnotationError::SchemaVersionMismatch {
            found: version,
            expected: PROJECT_VERSION,
        });
    }
    let project: Project = serde_json::from_value(value).map_err(|e| AnnotationError::Parse(e.to_string()))?;
    project.validate()?;
    Ok(project)
}

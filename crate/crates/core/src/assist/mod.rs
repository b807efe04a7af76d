//! LLM-assisted annotation.
//!
//! One turn runs: [`build_context`] (transcript, codebook, privacy-filtered
//! frames) → [`request_annotations`] against a chat-completions endpoint →
//! [`parse_suggestions`] → [`apply_suggestions`], which turns the accepted
//! suggestions into a new free-text tier.

mod client;
mod suggest;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{AnnotationError, Codebook, Project, TierKind};
use crate::layout::DataDir;
use crate::media::avi::read_avi;
use crate::media::{load_frame_index, load_transcript, MediaError, MediaManifest, TranscriptSegment};

pub use client::{
    build_request_body, request_annotations, ChatBackend, HttpChatClient, BASE_URL_ENV, DEFAULT_BASE_URL, KEY_ENV,
    MODEL_ENV,
};
pub use suggest::{
    apply_suggestions, parse_suggestions, serialize_suggestions, ApplyReport, LlmSuggestion, ParsedSuggestions,
    Rejection,
};

/// Instructions sent with every request. The answer format is fixed here so
/// [`parse_suggestions`] has a contract to check against.
pub const SYSTEM_PROMPT: &str = "You assist researchers annotating human-robot interaction recordings. \
You receive an instruction, a speaker-labelled transcript with times in seconds, optionally a codebook, \
and optionally video frames labelled with their time in seconds. \
Answer with a JSON array and nothing else. Each element is an object \
{\"tier\": string, \"start\": number, \"end\": number, \"value\": string} \
where start and end are seconds from the beginning of the recording, start < end, \
tier names the annotation track the item belongs to, and value is the annotation text \
(a code from the codebook when one is given). Return [] when nothing applies.";

#[derive(Debug, Error)]
pub enum AssistError {
    #[error("chat endpoint rejected or lacks credentials: {0}")]
    Auth(String),
    #[error("chat endpoint unreachable after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("request too large for the chat endpoint")]
    PayloadTooLarge,
    #[error("chat response not understood: {0}")]
    BadResponse(String),
    #[error("no JSON array found in the response")]
    NoJsonFound,
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

/// Decides whether a frame shows a face. Implementations wrap whatever
/// detector the deployment provides.
pub trait FrameFilter: Send + Sync {
    fn contains_face(&self, bag_time_ms: u64, jpeg: &[u8]) -> bool;
}

/// Which frames may leave the machine.
#[derive(Clone, Default)]
pub enum PrivacyPolicy {
    #[default]
    DenyAllFrames,
    AllowAllFrames,
    Detector(Arc<dyn FrameFilter>),
}

impl PrivacyPolicy {
    pub fn mode(&self) -> &'static str {
        match self {
            PrivacyPolicy::DenyAllFrames => "deny_all_frames",
            PrivacyPolicy::AllowAllFrames => "allow_all_frames",
            PrivacyPolicy::Detector(_) => "detector",
        }
    }

    pub fn admits(&self, bag_time_ms: u64, jpeg: &[u8]) -> bool {
        match self {
            PrivacyPolicy::DenyAllFrames => false,
            PrivacyPolicy::AllowAllFrames => true,
            PrivacyPolicy::Detector(f) => !f.contains_face(bag_time_ms, jpeg),
        }
    }
}

impl fmt::Debug for PrivacyPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mode())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeHint {
    pub code: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextFrame {
    pub bag_time_ms: u64,
    pub jpeg: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatContext {
    pub instruction: String,
    pub transcript: Vec<TranscriptSegment>,
    pub codebook: Option<Vec<CodeHint>>,
    pub frames: Vec<ContextFrame>,
    pub observation_ms: u64,
}

/// Target times for uniform sampling at `frames_per_minute` over
/// `[0, observation_ms)`.
pub fn sample_times(observation_ms: u64, frames_per_minute: f64) -> Vec<u64> {
    if !(frames_per_minute.is_finite() && frames_per_minute > 0.0) {
        return Vec::new();
    }
    let step = 60_000.0 / frames_per_minute;
    (0..)
        .map(|k| k as f64 * step)
        .take_while(|&t| t < observation_ms as f64)
        .map(|t| t.round() as u64)
        .collect()
}

/// Ordinal of the frame nearest each target time (earlier frame on ties),
/// without repeats.
fn nearest_frames(bag_times: &[u64], targets: &[u64]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &t in targets {
        let i = bag_times.partition_point(|&b| b < t);
        let pick = match (i.checked_sub(1), bag_times.get(i)) {
            (Some(p), Some(&n)) if t - bag_times[p] <= n - t => p,
            (Some(p), None) => p,
            (_, Some(_)) => i,
            (None, None) => continue,
        };
        if out.last() != Some(&pick) {
            out.push(pick);
        }
    }
    out
}

/// Transcript for the prompt: the project's transcript tiers when present
/// (they include coder corrections), otherwise the extracted transcript.
fn transcript_for(project: &Project, data: &DataDir, manifest: &MediaManifest) -> Result<Vec<TranscriptSegment>, MediaError> {
    let mut segs: Vec<TranscriptSegment> = project
        .tiers
        .iter()
        .filter(|t| t.kind == TierKind::Transcript)
        .flat_map(|t| {
            t.annotations.iter().map(|a| TranscriptSegment {
                speaker: t.name.clone(),
                start_ms: a.start_ms,
                end_ms: a.end_ms,
                text: a.value.clone(),
            })
        })
        .collect();
    if segs.is_empty() {
        segs = load_transcript(data, manifest)?;
    }
    segs.sort_by_key(|s| (s.start_ms, s.end_ms));
    Ok(segs)
}

pub fn build_context(
    project: &Project,
    data: &DataDir,
    manifest: &MediaManifest,
    instruction: &str,
    policy: &PrivacyPolicy,
    frames_per_minute: f64,
    codebook: Option<&Codebook>,
) -> Result<ChatContext, AssistError> {
    let mut frames = Vec::new();
    let wants_frames = !matches!(policy, PrivacyPolicy::DenyAllFrames);
    if let (true, Some(video)) = (wants_frames, &manifest.video) {
        let index = load_frame_index(data, manifest)?;
        let bag_times: Vec<u64> = index.entries.iter().map(|e| e.bag_time_ms).collect();
        let picks = nearest_frames(&bag_times, &sample_times(project.observation_ms, frames_per_minute));
        if !picks.is_empty() {
            let bytes = std::fs::read(data.processed(&manifest.bag_id).join(&video.path)).map_err(MediaError::from)?;
            let (_, jpegs) = read_avi(&bytes).map_err(MediaError::from)?;
            for i in picks {
                let (Some(jpeg), Some(&t)) = (jpegs.get(i), bag_times.get(i)) else { continue };
                if policy.admits(t, jpeg) {
                    frames.push(ContextFrame {
                        bag_time_ms: t,
                        jpeg: jpeg.clone(),
                    });
                }
            }
        }
    }
    Ok(ChatContext {
        instruction: instruction.to_string(),
        transcript: transcript_for(project, data, manifest)?,
        codebook: codebook.map(|b| {
            b.codes
                .iter()
                .map(|c| CodeHint {
                    code: c.code.clone(),
                    description: c.description.clone(),
                })
                .collect()
        }),
        frames,
        observation_ms: project.observation_ms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatEntry {
    pub role: ChatRole,
    pub content: String,
    pub attachments: usize,
}

/// Conversation log of one chat session: a system entry, then alternating
/// user and assistant turns.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChatTranscript {
    pub session_id: String,
    pub entries: Vec<ChatEntry>,
}

impl ChatTranscript {
    pub fn new(session_id: impl Into<String>) -> Self {
        ChatTranscript {
            session_id: session_id.into(),
            entries: Vec::new(),
        }
    }

    /// Records one completed exchange.
    pub fn record_turn(&mut self, user: &str, attachments: usize, assistant: &str) {
        if self.entries.is_empty() {
            self.entries.push(ChatEntry {
                role: ChatRole::System,
                content: SYSTEM_PROMPT.to_string(),
                attachments: 0,
            });
        }
        self.entries.push(ChatEntry {
            role: ChatRole::User,
            content: user.to_string(),
            attachments,
        });
        self.entries.push(ChatEntry {
            role: ChatRole::Assistant,
            content: assistant.to_string(),
            attachments: 0,
        });
    }

    /// Earlier user/assistant turns, oldest first.
    pub fn history(&self) -> impl Iterator<Item = &ChatEntry> {
        self.entries.iter().filter(|e| e.role != ChatRole::System)
    }

    pub fn is_well_formed(&self) -> bool {
        let mut it = self.entries.iter();
        match it.next() {
            None => return true,
            Some(e) if e.role != ChatRole::System => return false,
            _ => {}
        }
        it.enumerate().all(|(i, e)| {
            e.role
                == if i % 2 == 0 {
                    ChatRole::User
                } else {
                    ChatRole::Assistant
                }
        })
    }
}

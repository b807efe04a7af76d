//! Speech transcription behind a pluggable client.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::audio::read_wav;

pub const TOKEN_ENV: &str = "HUGGINGFACE_AUTH_TOKEN";
pub const URL_ENV: &str = "TRANSCRIBER_URL";

/// A segment on the zero-based timeline after speaker anonymization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub speaker: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub text: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranscriberError {
    #[error("transcriber rejected credentials: {0}")]
    Auth(String),
    #[error("transcriber unreachable after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("transcriber response not understood: {0}")]
    BadResponse(String),
    #[error("cannot read audio: {0}")]
    Audio(String),
}

/// Produces raw diarized segments (real speaker ids, timeline ms) for a WAV
/// file.
pub trait Transcriber: Send + Sync {
    fn transcribe_wav(&self, wav: &Path) -> Result<Vec<TranscriptSegment>, TranscriberError>;
}

/// Returns a fixed segment list regardless of input.
#[derive(Debug, Clone, Default)]
pub struct StubTranscriber {
    pub segments: Vec<TranscriptSegment>,
}

impl StubTranscriber {
    pub fn new(segments: Vec<TranscriptSegment>) -> Self {
        StubTranscriber { segments }
    }
}

impl Transcriber for StubTranscriber {
    fn transcribe_wav(&self, _wav: &Path) -> Result<Vec<TranscriptSegment>, TranscriberError> {
        Ok(self.segments.clone())
    }
}

/// POSTs the WAV bytes to an endpoint and expects
/// `{"segments": [{"speaker", "start", "end", "text"}]}` (or the bare array),
/// times in seconds.
#[derive(Debug, Clone)]
pub struct HttpTranscriber {
    pub url: String,
    pub token: String,
    pub attempts: u32,
    pub backoff: Duration,
}

impl HttpTranscriber {
    pub fn new(url: impl Into<String>, token: impl Into<String>) -> Self {
        HttpTranscriber {
            url: url.into(),
            token: token.into(),
            attempts: 3,
            backoff: Duration::from_millis(250),
        }
    }

    /// Reads `TRANSCRIBER_URL` and `HUGGINGFACE_AUTH_TOKEN`.
    pub fn from_env() -> Result<Self, TranscriberError> {
        let token = std::env::var(TOKEN_ENV)
            .ok()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| TranscriberError::Auth(format!("{TOKEN_ENV} is not set")))?;
        let url = std::env::var(URL_ENV)
            .ok()
            .filter(|u| !u.is_empty())
            .ok_or_else(|| TranscriberError::Transport {
                attempts: 0,
                message: format!("{URL_ENV} is not set"),
            })?;
        Ok(HttpTranscriber::new(url, token))
    }
}

#[derive(Deserialize)]
struct WireSegment {
    speaker: String,
    start: f64,
    end: f64,
    #[serde(default)]
    text: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WireBody {
    Wrapped { segments: Vec<WireSegment> },
    Bare(Vec<WireSegment>),
}

fn seconds_to_ms(s: f64) -> u64 {
    if s.is_finite() && s > 0.0 {
        (s * 1000.0).round() as u64
    } else {
        0
    }
}

impl Transcriber for HttpTranscriber {
    fn transcribe_wav(&self, wav: &Path) -> Result<Vec<TranscriptSegment>, TranscriberError> {
        let body = std::fs::read(wav).map_err(|e| TranscriberError::Audio(e.to_string()))?;
        let client = reqwest::blocking::Client::new();
        let mut last = String::new();
        for attempt in 1..=self.attempts.max(1) {
            if attempt > 1 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 2));
            }
            let resp = client
                .post(&self.url)
                .bearer_auth(&self.token)
                .header("Content-Type", "audio/wav")
                .body(body.clone())
                .send();
            let resp = match resp {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            if status.as_u16() == 401 || status.as_u16() == 403 {
                return Err(TranscriberError::Auth(format!("HTTP {status}")));
            }
            if status.is_server_error() || status.as_u16() == 429 {
                last = format!("HTTP {status}");
                continue;
            }
            let text = resp.text().map_err(|e| TranscriberError::BadResponse(e.to_string()))?;
            if !status.is_success() {
                return Err(TranscriberError::BadResponse(format!("HTTP {status}: {text}")));
            }
            let parsed: WireBody = serde_json::from_str(&text).map_err(|e| TranscriberError::BadResponse(e.to_string()))?;
            let segs = match parsed {
                WireBody::Wrapped { segments } | WireBody::Bare(segments) => segments,
            };
            return Ok(segs
                .into_iter()
                .map(|s| TranscriptSegment {
                    speaker: s.speaker,
                    start_ms: seconds_to_ms(s.start),
                    end_ms: seconds_to_ms(s.end),
                    text: s.text,
                })
                .collect());
        }
        Err(TranscriberError::Transport {
            attempts: self.attempts.max(1),
            message: last,
        })
    }
}

/// Sorts by start, renames speakers to `Speaker N` in order of first
/// appearance and clips same-speaker overlaps so each speaker's segments are
/// disjoint. Returns the segments and a warning per adjustment.
pub fn normalize_segments(mut raw: Vec<TranscriptSegment>) -> (Vec<TranscriptSegment>, Vec<String>) {
    raw.sort_by_key(|s| (s.start_ms, s.end_ms));
    let mut labels: HashMap<String, String> = HashMap::new();
    let mut last_end: HashMap<String, u64> = HashMap::new();
    let mut warnings = Vec::new();
    let mut out = Vec::with_capacity(raw.len());
    for seg in raw {
        // labels are handed out on the first kept segment only
        let label = labels
            .get(&seg.speaker)
            .cloned()
            .unwrap_or_else(|| format!("Speaker {}", labels.len() + 1));
        let prev = last_end.get(&label).copied().unwrap_or(0);
        let start = seg.start_ms.max(prev);
        if start >= seg.end_ms {
            warnings.push(format!("{label}: segment {}-{} is empty after clipping, dropped", seg.start_ms, seg.end_ms));
            continue;
        }
        if start > seg.start_ms {
            warnings.push(format!(
                "{label}: segment {}-{} overlaps the previous one, clipped to start at {start}",
                seg.start_ms, seg.end_ms
            ));
        }
        labels.entry(seg.speaker).or_insert_with(|| label.clone());
        last_end.insert(label.clone(), seg.end_ms);
        out.push(TranscriptSegment {
            speaker: label,
            start_ms: start,
            end_ms: seg.end_ms,
            text: seg.text,
        });
    }
    (out, warnings)
}

/// Transcribes a WAV file. Silent (zero-length) audio yields no segments
/// without calling the transcriber.
pub fn transcribe(audio: &Path, transcriber: &dyn Transcriber) -> Result<Vec<TranscriptSegment>, TranscriberError> {
    let pcm = read_wav(audio).map_err(|e| TranscriberError::Audio(e.to_string()))?;
    if pcm.samples.is_empty() {
        return Ok(Vec::new());
    }
    let (segments, warnings) = normalize_segments(transcriber.transcribe_wav(audio)?);
    for w in warnings {
        warn!("{w}");
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(speaker: &str, start_ms: u64, end_ms: u64) -> TranscriptSegment {
        TranscriptSegment {
            speaker: speaker.into(),
            start_ms,
            end_ms,
            text: String::new(),
        }
    }

    #[test]
    fn labels_follow_first_appearance() {
        let (out, w) = normalize_segments(vec![seg("bob", 5000, 6000), seg("alice", 0, 1000), seg("bob", 2000, 3000)]);
        let labels: Vec<&str> = out.iter().map(|s| s.speaker.as_str()).collect();
        assert_eq!(labels, ["Speaker 1", "Speaker 2", "Speaker 2"]);
        assert!(w.is_empty());
    }

    #[test]
    fn same_speaker_overlap_is_clipped() {
        let (out, w) = normalize_segments(vec![seg("a", 1000, 3000), seg("a", 2000, 4000)]);
        assert_eq!((out[1].start_ms, out[1].end_ms), (3000, 4000));
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn invalid_first_segment_does_not_take_a_label() {
        let (out, _) = normalize_segments(vec![seg("ghost", 100, 100), seg("a", 200, 300)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].speaker, "Speaker 1");
    }

    #[test]
    fn cross_speaker_overlap_is_kept() {
        let (out, w) = normalize_segments(vec![seg("a", 1000, 3000), seg("b", 2000, 4000)]);
        assert_eq!(out[1].start_ms, 2000);
        assert!(w.is_empty());
    }

    #[test]
    fn swallowed_segment_is_dropped() {
        let (out, w) = normalize_segments(vec![seg("a", 1000, 5000), seg("a", 2000, 4000)]);
        assert_eq!(out.len(), 1);
        assert_eq!(w.len(), 1);
    }
}

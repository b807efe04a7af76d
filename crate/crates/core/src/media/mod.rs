//! Extraction of playable media from a bag, cached per bag content.
//!
//! [`process_bag`] writes everything for one bag under
//! `processed/<bag_id>/`:
//!
//! * `video.avi`: MJPEG frames of the video topic
//! * `frames.json`: the [`FrameIndex`] mapping playback time to bag time
//! * `audio.wav`: 16-bit PCM of the audio topic
//! * `transcript.json`: anonymized [`TranscriptSegment`]s
//! * `manifest.json`: the [`MediaManifest`] tying these together
//!
//! All times are milliseconds on a zero-based timeline whose origin is the
//! first message stamp in the bag.

pub mod audio;
pub mod avi;
mod frame_index;
mod pipeline;
pub mod transcribe;

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bag::{BagError, TimeStamp};
use crate::codec::DEFAULT_AUDIO_TYPES;

pub use audio::{AudioDecoder, CommandDecoder, Pcm};
pub use frame_index::{media_time_to_bag_ms, median_interval_us, FrameEntry, FrameIndex};
pub use pipeline::{
    bag_id_for, config_fingerprint, load_frame_index, load_manifest, load_transcript, lookup_cache, process_bag, ProcessContext,
    ProcessOutcome, ProcessedCacheEntry,
};
pub use transcribe::{
    normalize_segments, transcribe, HttpTranscriber, StubTranscriber, Transcriber, TranscriberError,
    TranscriptSegment,
};

pub const VIDEO_FILE: &str = "video.avi";
pub const FRAME_INDEX_FILE: &str = "frames.json";
pub const AUDIO_FILE: &str = "audio.wav";
pub const TRANSCRIPT_FILE: &str = "transcript.json";

#[derive(Debug, Error)]
pub enum MediaError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Bag(#[from] BagError),
    #[error("frame encoding failed: {0}")]
    Encode(String),
    #[error("audio decoding failed: {0}")]
    Decoder(String),
    #[error("frame index is empty")]
    EmptyIndex,
    #[error(transparent)]
    Transcriber(#[from] TranscriberError),
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("bag '{0}' has not been processed")]
    NotProcessed(String),
}

/// What to extract and how. Hashed into the cache fingerprint, so any change
/// re-extracts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub video_topic: String,
    pub audio_topic: String,
    /// `mp3` (decoded through the [`AudioDecoder`]) or a raw PCM hint such
    /// as `pcm_s16le`.
    pub audio_format: String,
    pub audio_sample_rate: u32,
    pub audio_channels: u16,
    pub audio_types: Vec<String>,
    pub jpeg_quality: u8,
    pub transcribe: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            video_topic: "/image_raw".into(),
            audio_topic: "/audio".into(),
            audio_format: "mp3".into(),
            audio_sample_rate: 16_000,
            audio_channels: 1,
            audio_types: DEFAULT_AUDIO_TYPES.iter().map(|s| s.to_string()).collect(),
            jpeg_quality: 85,
            transcribe: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoInfo {
    /// Relative to the bag's processed directory, like every manifest path.
    pub path: String,
    pub frame_count: u32,
    pub frame_index_path: String,
    pub width: u32,
    pub height: u32,
    pub frame_interval_us: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioInfo {
    pub path: String,
    pub sample_rate: u32,
    pub channels: u16,
    pub duration_ms: u64,
    /// Timeline position of the first audio sample.
    pub offset_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptInfo {
    pub path: Option<String>,
    pub speakers: Vec<String>,
    pub segment_count: usize,
    /// Set when transcription failed; the rest of the manifest is valid.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaManifest {
    pub bag_id: String,
    pub source_name: String,
    pub timeline_origin: TimeStamp,
    pub observation_ms: u64,
    pub video: Option<VideoInfo>,
    pub audio: Option<AudioInfo>,
    pub transcript: Option<TranscriptInfo>,
    pub warnings: Vec<String>,
    pub config_fingerprint: String,
    pub produced_at_ms: u64,
}

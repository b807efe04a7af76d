use std::collections::HashMap;
use std::fs::File;
use std::io::{self, Cursor};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{SystemTime, UNIX_EPOCH};

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};
use log::{info, warn};
use sha2::{Digest, Sha256};

use super::audio::{is_raw_pcm, write_wav, AudioDecoder, CommandDecoder, Pcm};
use super::avi::AviWriter;
use super::frame_index::{median_interval_us, FrameIndex};
use super::transcribe::{transcribe, Transcriber, TranscriptSegment};
use super::{
    AudioInfo, ExtractionConfig, MediaError, MediaManifest, TranscriptInfo, VideoInfo, AUDIO_FILE, FRAME_INDEX_FILE,
    TRANSCRIPT_FILE, VIDEO_FILE,
};
use crate::bag::{BagHandle, MessageFilter, RawMessage, TimeStamp};
use crate::codec::{decode_audio_with, decode_image, CodecError, ImageFrame};
use crate::exec::Exec;
use crate::layout::{write_atomic, DataDir};

const FRAME_BATCH: usize = 64;
const DEFAULT_FRAME_US: u32 = 33_333;

/// Services and settings around an extraction run.
#[derive(Clone)]
pub struct ProcessContext {
    pub data: DataDir,
    pub exec: Exec,
    pub transcriber: Option<Arc<dyn Transcriber>>,
    pub decoder: Arc<dyn AudioDecoder>,
}

impl ProcessContext {
    pub fn new(data: DataDir) -> Self {
        ProcessContext {
            data,
            exec: Exec::default(),
            transcriber: None,
            decoder: Arc::new(CommandDecoder::default()),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_transcriber(mut self, t: Arc<dyn Transcriber>) -> Self {
        self.transcriber = Some(t);
        self
    }

    pub fn with_decoder(mut self, d: Arc<dyn AudioDecoder>) -> Self {
        self.decoder = d;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ProcessOutcome {
    pub manifest: MediaManifest,
    /// The manifest file exactly as stored.
    pub manifest_bytes: Vec<u8>,
    pub cache_hit: bool,
    /// Frames that went through the JPEG encoder (pass-through frames are not
    /// counted).
    pub frames_encoded: u64,
    pub frames_written: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedCacheEntry {
    pub bag_id: String,
    pub manifest_path: PathBuf,
    pub config_fingerprint: String,
}

/// Content hash of a bag file: the first 16 hex digits of its SHA-256.
pub fn bag_id_for(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    io::copy(&mut File::open(path)?, &mut hasher)?;
    Ok(hex::encode(hasher.finalize())[..16].to_string())
}

/// Cache key for an extraction config.
pub fn config_fingerprint(config: &ExtractionConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

fn bag_lock(bag_id: &str) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<String, Arc<Mutex<()>>>>> = OnceLock::new();
    let mut map = LOCKS.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    map.entry(bag_id.to_string()).or_default().clone()
}

pub fn load_manifest(data: &DataDir, bag_id: &str) -> Result<MediaManifest, MediaError> {
    let bytes = match std::fs::read(data.manifest_path(bag_id)) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(MediaError::NotProcessed(bag_id.into())),
        Err(e) => return Err(e.into()),
    };
    serde_json::from_slice(&bytes).map_err(|e| MediaError::Manifest(e.to_string()))
}

fn referenced_files_exist(data: &DataDir, m: &MediaManifest) -> bool {
    let dir = data.processed(&m.bag_id);
    let mut paths: Vec<&str> = Vec::new();
    if let Some(v) = &m.video {
        paths.push(&v.path);
        paths.push(&v.frame_index_path);
    }
    if let Some(a) = &m.audio {
        paths.push(&a.path);
    }
    if let Some(p) = m.transcript.as_ref().and_then(|t| t.path.as_deref()) {
        paths.push(p);
    }
    paths.iter().all(|p| dir.join(p).is_file())
}

/// The stored cache entry for `bag_id`, if its manifest parses and every
/// file it references is present.
pub fn lookup_cache(data: &DataDir, bag_id: &str) -> Option<ProcessedCacheEntry> {
    let m = load_manifest(data, bag_id).ok()?;
    referenced_files_exist(data, &m).then(|| ProcessedCacheEntry {
        bag_id: m.bag_id,
        manifest_path: data.manifest_path(bag_id),
        config_fingerprint: m.config_fingerprint,
    })
}

pub fn load_frame_index(data: &DataDir, manifest: &MediaManifest) -> Result<FrameIndex, MediaError> {
    let v = manifest.video.as_ref().ok_or(MediaError::EmptyIndex)?;
    let bytes = std::fs::read(data.processed(&manifest.bag_id).join(&v.frame_index_path))?;
    serde_json::from_slice(&bytes).map_err(|e| MediaError::Manifest(e.to_string()))
}

pub fn load_transcript(data: &DataDir, manifest: &MediaManifest) -> Result<Vec<TranscriptSegment>, MediaError> {
    let Some(path) = manifest.transcript.as_ref().and_then(|t| t.path.as_ref()) else {
        return Ok(Vec::new());
    };
    let bytes = std::fs::read(data.processed(&manifest.bag_id).join(path))?;
    serde_json::from_slice(&bytes).map_err(|e| MediaError::Manifest(e.to_string()))
}

/// Extracts video, audio and (optionally) a transcript from a bag.
///
/// Runs at most once per bag content and config: later calls return the
/// stored manifest byte for byte without touching the bag's messages.
/// Concurrent calls for the same bag serialize on a per-bag lock.
pub fn process_bag(
    handle: &BagHandle,
    config: &ExtractionConfig,
    ctx: &ProcessContext,
) -> Result<ProcessOutcome, MediaError> {
    let bag_id = bag_id_for(handle.path())?;
    let fp = config_fingerprint(config);
    let lock = bag_lock(&bag_id);
    let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());

    if let Some(entry) = lookup_cache(&ctx.data, &bag_id) {
        if entry.config_fingerprint == fp {
            let manifest_bytes = std::fs::read(&entry.manifest_path)?;
            let manifest = serde_json::from_slice(&manifest_bytes).map_err(|e| MediaError::Manifest(e.to_string()))?;
            info!("{bag_id}: cache hit");
            return Ok(ProcessOutcome {
                manifest,
                manifest_bytes,
                cache_hit: true,
                frames_encoded: 0,
                frames_written: 0,
            });
        }
    }

    let dir = ctx.data.processed(&bag_id);
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    std::fs::create_dir_all(&dir)?;

    let (origin, last) = handle.time_span().unwrap_or_default();
    let mut warnings = Vec::new();

    let (video, frames_encoded, frames_written) = extract_video(handle, config, ctx.exec, &dir, origin, &mut warnings)?;
    let audio = extract_audio(handle, config, ctx.decoder.as_ref(), &dir, origin, &mut warnings)?;
    let transcript = if config.transcribe {
        Some(run_transcriber(ctx.transcriber.as_deref(), audio.as_ref(), &dir, &mut warnings)?)
    } else {
        None
    };

    let manifest = MediaManifest {
        bag_id: bag_id.clone(),
        source_name: handle
            .path()
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        timeline_origin: origin,
        observation_ms: last.millis_since(origin),
        video,
        audio,
        transcript,
        warnings,
        config_fingerprint: fp,
        produced_at_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| MediaError::Manifest(e.to_string()))?;
    write_atomic(&ctx.data.manifest_path(&bag_id), &manifest_bytes)?;
    Ok(ProcessOutcome {
        manifest,
        manifest_bytes,
        cache_hit: false,
        frames_encoded,
        frames_written,
    })
}

struct EncodedFrame {
    jpeg: Vec<u8>,
    width: u32,
    height: u32,
    encoded: bool,
}

/// Tightly packed 8-bit pixels ready for the JPEG encoder.
fn packed_pixels(f: &ImageFrame) -> Result<(Vec<u8>, ExtendedColorType), String> {
    let (in_bpp, out_bpp, color) = match f.encoding.as_str() {
        "rgb8" | "bgr8" | "8UC3" => (3, 3, ExtendedColorType::Rgb8),
        "rgba8" | "bgra8" | "8UC4" => (4, 3, ExtendedColorType::Rgb8),
        "mono8" | "8UC1" => (1, 1, ExtendedColorType::L8),
        "mono16" | "16UC1" => (2, 1, ExtendedColorType::L8),
        other => return Err(format!("unsupported raw encoding '{other}'")),
    };
    let (w, h, step) = (f.width as usize, f.height as usize, f.step as usize);
    if step < w * in_bpp {
        return Err(format!("step {step} too small for width {w} in {}", f.encoding));
    }
    let swap_rb = matches!(f.encoding.as_str(), "bgr8" | "bgra8" | "8UC3" | "8UC4");
    let mut out = Vec::with_capacity(w * h * out_bpp);
    for y in 0..h {
        let row = &f.pixel_data[y * step..y * step + w * in_bpp];
        for px in row.chunks_exact(in_bpp) {
            match (in_bpp, swap_rb) {
                (1, _) => out.push(px[0]),
                // 16-bit samples are little-endian here; keep the high byte
                (2, _) => out.push(if f.is_bigendian { px[0] } else { px[1] }),
                (_, false) => out.extend_from_slice(&px[..3]),
                (_, true) => out.extend_from_slice(&[px[2], px[1], px[0]]),
            }
        }
    }
    Ok((out, color))
}

fn to_jpeg(f: &ImageFrame, quality: u8) -> Result<EncodedFrame, String> {
    if f.is_compressed() {
        if f.encoding != "jpeg" {
            return Err(format!("compressed format '{}' is not jpeg", f.encoding));
        }
        let (width, height) = ImageReader::with_format(Cursor::new(&f.pixel_data), ImageFormat::Jpeg)
            .into_dimensions()
            .map_err(|e| e.to_string())?;
        return Ok(EncodedFrame {
            jpeg: f.pixel_data.clone(),
            width,
            height,
            encoded: false,
        });
    }
    let (pixels, color) = packed_pixels(f)?;
    let mut out = Cursor::new(Vec::new());
    JpegEncoder::new_with_quality(&mut out, quality)
        .write_image(&pixels, f.width, f.height, color)
        .map_err(|e| e.to_string())?;
    Ok(EncodedFrame {
        jpeg: out.into_inner(),
        width: f.width,
        height: f.height,
        encoded: true,
    })
}

fn decode_frame(handle: &BagHandle, m: &RawMessage, quality: u8) -> Result<EncodedFrame, String> {
    let conn = handle.connection(m.conn_id).ok_or("unknown connection")?;
    let frame = decode_image(conn, &m.payload, m.stamp).map_err(|e: CodecError| e.to_string())?;
    to_jpeg(&frame, quality)
}

type VideoResult = (Option<VideoInfo>, u64, u64);

fn extract_video(
    handle: &BagHandle,
    config: &ExtractionConfig,
    exec: Exec,
    dir: &Path,
    origin: TimeStamp,
    warnings: &mut Vec<String>,
) -> Result<VideoResult, MediaError> {
    if handle.connections_for(&config.video_topic).is_empty() {
        warnings.push(format!("TopicMissing: video topic '{}' not in bag", config.video_topic));
        return Ok((None, 0, 0));
    }
    let avi_path = dir.join(VIDEO_FILE);
    let mut writer: Option<AviWriter> = None;
    let mut dims = (0, 0);
    let mut stamps_ms = Vec::new();
    let mut stamps_us = Vec::new();
    let mut encoded = 0u64;
    let mut skipped = 0usize;
    let mut stream = handle.read_messages(&MessageFilter::topics([config.video_topic.clone()]))?;
    loop {
        let batch: Vec<RawMessage> = stream.by_ref().take(FRAME_BATCH).collect::<Result<_, _>>()?;
        if batch.is_empty() {
            break;
        }
        let frames = exec.map(&batch, |m| decode_frame(handle, m, config.jpeg_quality));
        for (m, frame) in batch.iter().zip(frames) {
            let frame = match frame {
                Ok(f) => f,
                Err(e) => {
                    if skipped == 0 {
                        warnings.push(format!("frame at {} skipped: {e}", m.stamp));
                    }
                    skipped += 1;
                    continue;
                }
            };
            let w = match &mut writer {
                Some(w) => w,
                None => {
                    dims = (frame.width, frame.height);
                    writer.insert(AviWriter::create(&avi_path, frame.width, frame.height)?)
                }
            };
            w.push(&frame.jpeg)?;
            encoded += frame.encoded as u64;
            stamps_ms.push(m.stamp.millis_since(origin));
            stamps_us.push(m.stamp.as_nanos().saturating_sub(origin.as_nanos()) / 1000);
        }
    }
    if skipped > 1 {
        warnings.push(format!("{skipped} video frames skipped in total"));
    }
    let Some(writer) = writer else {
        warnings.push(format!("no decodable frames on '{}'", config.video_topic));
        return Ok((None, encoded, 0));
    };
    let interval = median_interval_us(&stamps_us, DEFAULT_FRAME_US);
    writer.finish(interval)?;
    let index = FrameIndex::from_bag_times(interval, &stamps_ms);
    let index_json = serde_json::to_vec(&index).map_err(|e| MediaError::Manifest(e.to_string()))?;
    write_atomic(&dir.join(FRAME_INDEX_FILE), &index_json)?;
    let count = stamps_ms.len() as u64;
    Ok((
        Some(VideoInfo {
            path: VIDEO_FILE.into(),
            frame_count: count as u32,
            frame_index_path: FRAME_INDEX_FILE.into(),
            width: dims.0,
            height: dims.1,
            frame_interval_us: interval,
        }),
        encoded,
        count,
    ))
}

fn extract_audio(
    handle: &BagHandle,
    config: &ExtractionConfig,
    decoder: &dyn AudioDecoder,
    dir: &Path,
    origin: TimeStamp,
    warnings: &mut Vec<String>,
) -> Result<Option<AudioInfo>, MediaError> {
    if handle.connections_for(&config.audio_topic).is_empty() {
        warnings.push(format!("TopicMissing: audio topic '{}' not in bag", config.audio_topic));
        return Ok(None);
    }
    let types: Vec<&str> = config.audio_types.iter().map(String::as_str).collect();
    let mut data = Vec::new();
    let mut first: Option<TimeStamp> = None;
    let mut dropped = 0usize;
    for m in handle.read_messages(&MessageFilter::topics([config.audio_topic.clone()]))? {
        let m = m?;
        let conn = handle.connection(m.conn_id).expect("stream yields known connections");
        match decode_audio_with(conn, &m.payload, m.stamp, &config.audio_format, &types) {
            Ok(chunk) => {
                first.get_or_insert(chunk.stamp);
                data.extend_from_slice(&chunk.data);
            }
            Err(e) => {
                if dropped == 0 {
                    warnings.push(format!("audio message at {} dropped: {e}", m.stamp));
                }
                dropped += 1;
            }
        }
    }
    if dropped > 1 {
        warnings.push(format!("{dropped} audio messages dropped in total"));
    }
    let Some(first) = first else {
        warnings.push(format!("no audio data on '{}'", config.audio_topic));
        return Ok(None);
    };
    let pcm = if is_raw_pcm(&config.audio_format) {
        Pcm::from_s16le(&data, config.audio_sample_rate, config.audio_channels)
    } else {
        match decoder.decode(&config.audio_format, &data, config.audio_sample_rate, config.audio_channels) {
            Ok(p) => p,
            Err(e) => {
                warn!("audio omitted: {e}");
                warnings.push(format!("audio omitted: {e}"));
                return Ok(None);
            }
        }
    };
    write_wav(&dir.join(AUDIO_FILE), &pcm)?;
    Ok(Some(AudioInfo {
        path: AUDIO_FILE.into(),
        sample_rate: pcm.sample_rate,
        channels: pcm.channels,
        duration_ms: pcm.duration_ms(),
        offset_ms: first.millis_since(origin),
    }))
}

fn run_transcriber(
    transcriber: Option<&dyn Transcriber>,
    audio: Option<&AudioInfo>,
    dir: &Path,
    warnings: &mut Vec<String>,
) -> Result<TranscriptInfo, MediaError> {
    let failed = |msg: String, warnings: &mut Vec<String>| {
        warnings.push(format!("transcript failed: {msg}"));
        TranscriptInfo {
            path: None,
            speakers: Vec::new(),
            segment_count: 0,
            error: Some(msg),
        }
    };
    let Some(transcriber) = transcriber else {
        return Ok(failed("no transcriber configured".into(), warnings));
    };
    let Some(audio) = audio else {
        return Ok(failed("no audio to transcribe".into(), warnings));
    };
    let mut segments = match transcribe(&dir.join(&audio.path), transcriber) {
        Ok(s) => s,
        Err(e) => return Ok(failed(e.to_string(), warnings)),
    };
    for s in &mut segments {
        s.start_ms += audio.offset_ms;
        s.end_ms += audio.offset_ms;
    }
    let mut speakers: Vec<String> = Vec::new();
    for s in &segments {
        if !speakers.contains(&s.speaker) {
            speakers.push(s.speaker.clone());
        }
    }
    let json = serde_json::to_vec_pretty(&segments).map_err(|e| MediaError::Manifest(e.to_string()))?;
    write_atomic(&dir.join(TRANSCRIPT_FILE), &json)?;
    Ok(TranscriptInfo {
        path: Some(TRANSCRIPT_FILE.into()),
        speakers,
        segment_count: segments.len(),
        error: None,
    })
}

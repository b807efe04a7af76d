//! Audio extraction: compressed or raw chunks to 16-bit PCM WAV.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use super::MediaError;

/// Decoded 16-bit interleaved PCM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pcm {
    pub sample_rate: u32,
    pub channels: u16,
    pub samples: Vec<i16>,
}

impl Pcm {
    pub fn duration_ms(&self) -> u64 {
        if self.sample_rate == 0 || self.channels == 0 {
            return 0;
        }
        let frames = self.samples.len() as u64 / self.channels as u64;
        frames * 1000 / self.sample_rate as u64
    }

    /// Interprets little-endian s16 bytes; a dangling odd byte is dropped.
    pub fn from_s16le(bytes: &[u8], sample_rate: u32, channels: u16) -> Pcm {
        Pcm {
            sample_rate,
            channels,
            samples: bytes
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]))
                .collect(),
        }
    }
}

/// True for hints naming raw little-endian 16-bit PCM.
pub fn is_raw_pcm(format_hint: &str) -> bool {
    matches!(
        format_hint.to_ascii_lowercase().as_str(),
        "pcm" | "s16le" | "pcm_s16le" | "wave" | "raw"
    )
}

/// Turns the concatenated payload of every audio message into PCM.
pub trait AudioDecoder: Send + Sync {
    fn decode(&self, format_hint: &str, data: &[u8], sample_rate: u32, channels: u16) -> Result<Pcm, MediaError>;
}

/// Pipes the stream through an external program that writes s16le PCM to
/// stdout. Arguments may contain `{format}`, `{rate}` and `{channels}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandDecoder {
    pub program: String,
    pub args: Vec<String>,
}

impl Default for CommandDecoder {
    fn default() -> Self {
        let args = "-hide_banner -loglevel error -f {format} -i pipe:0 -f s16le -ac {channels} -ar {rate} pipe:1";
        CommandDecoder {
            program: "ffmpeg".into(),
            args: args.split(' ').map(String::from).collect(),
        }
    }
}

impl AudioDecoder for CommandDecoder {
    fn decode(&self, format_hint: &str, data: &[u8], sample_rate: u32, channels: u16) -> Result<Pcm, MediaError> {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| {
                a.replace("{format}", format_hint)
                    .replace("{rate}", &sample_rate.to_string())
                    .replace("{channels}", &channels.to_string())
            })
            .collect();
        let mut child = Command::new(&self.program)
            .args(&args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| MediaError::Decoder(format!("cannot run '{}': {e}", self.program)))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = data.to_vec();
        // feed from a thread so a full stdout pipe cannot deadlock us
        let feeder = std::thread::spawn(move || stdin.write_all(&input));
        let out = child
            .wait_with_output()
            .map_err(|e| MediaError::Decoder(e.to_string()))?;
        let _ = feeder.join();
        if !out.status.success() {
            return Err(MediaError::Decoder(format!(
                "'{}' exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(Pcm::from_s16le(&out.stdout, sample_rate, channels))
    }
}

pub fn write_wav(path: &Path, pcm: &Pcm) -> Result<(), MediaError> {
    let spec = hound::WavSpec {
        channels: pcm.channels,
        sample_rate: pcm.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| MediaError::Encode(e.to_string()))?;
    for &s in &pcm.samples {
        w.write_sample(s).map_err(|e| MediaError::Encode(e.to_string()))?;
    }
    w.finalize().map_err(|e| MediaError::Encode(e.to_string()))
}

pub fn read_wav(path: &Path) -> Result<Pcm, MediaError> {
    let mut r = hound::WavReader::open(path).map_err(|e| MediaError::Decoder(e.to_string()))?;
    let spec = r.spec();
    let samples = r
        .samples::<i16>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| MediaError::Decoder(e.to_string()))?;
    Ok(Pcm {
        sample_rate: spec.sample_rate,
        channels: spec.channels,
        samples,
    })
}

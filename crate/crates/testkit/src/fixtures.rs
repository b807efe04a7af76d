//! Synthetic recordings built with the fixture bag writer.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageEncoder};
use rosann_core::bag::{write_bag_with, Compression, TopicSpec, WriteOptions};
use rosann_core::TimeStamp;

use crate::ros;

/// A small JPEG whose colour depends on `seed`.
pub fn jpeg(width: u32, height: u32, seed: u8) -> Vec<u8> {
    let rgb = rgb_pattern(width, height, seed);
    let mut out = Cursor::new(Vec::new());
    JpegEncoder::new_with_quality(&mut out, 80)
        .write_image(&rgb, width, height, ExtendedColorType::Rgb8)
        .unwrap();
    out.into_inner()
}

pub fn rgb_pattern(width: u32, height: u32, seed: u8) -> Vec<u8> {
    let mut px = Vec::with_capacity((width * height * 3) as usize);
    for y in 0..height {
        for x in 0..width {
            px.push(seed.wrapping_add(x as u8));
            px.push(seed.wrapping_mul(3).wrapping_add(y as u8));
            px.push(128);
        }
    }
    px
}

/// Layout of a synthetic camera + microphone recording.
#[derive(Debug, Clone)]
pub struct MediaFixture {
    pub origin: TimeStamp,
    pub frames: usize,
    pub frame_interval_ms: u64,
    /// Raw rgb8 `sensor_msgs/Image` instead of JPEG `CompressedImage`.
    pub raw_frames: bool,
    pub width: u32,
    pub height: u32,
    pub audio_chunks: usize,
    pub audio_interval_ms: u64,
    /// 16-bit mono PCM samples per audio message.
    pub samples_per_chunk: usize,
    pub video_topic: String,
    pub audio_topic: String,
    pub compression: Compression,
}

impl Default for MediaFixture {
    fn default() -> Self {
        MediaFixture {
            origin: TimeStamp::new(1_700_000_000, 0),
            frames: 10,
            frame_interval_ms: 100,
            raw_frames: false,
            width: 16,
            height: 8,
            audio_chunks: 5,
            audio_interval_ms: 200,
            samples_per_chunk: 160,
            video_topic: "/image_raw".into(),
            audio_topic: "/audio".into(),
            compression: Compression::None,
        }
    }
}

impl MediaFixture {
    pub fn frame_stamp(&self, i: usize) -> TimeStamp {
        TimeStamp::from_nanos(self.origin.as_nanos() + i as u64 * self.frame_interval_ms * 1_000_000)
    }

    pub fn audio_stamp(&self, i: usize) -> TimeStamp {
        TimeStamp::from_nanos(self.origin.as_nanos() + i as u64 * self.audio_interval_ms * 1_000_000)
    }

    pub fn audio_samples(&self, chunk: usize) -> Vec<i16> {
        (0..self.samples_per_chunk)
            .map(|k| ((chunk * self.samples_per_chunk + k) as i32 * 37 % 2000 - 1000) as i16)
            .collect()
    }

    pub fn specs(&self) -> Vec<TopicSpec> {
        let mut specs = Vec::new();
        if self.frames > 0 {
            let mut video = if self.raw_frames {
                TopicSpec::new(&self.video_topic, "sensor_msgs/Image", ros::IMAGE_DEFINITION)
            } else {
                TopicSpec::new(
                    &self.video_topic,
                    "sensor_msgs/CompressedImage",
                    ros::COMPRESSED_IMAGE_DEFINITION,
                )
            };
            for i in 0..self.frames {
                let t = self.frame_stamp(i);
                let payload = if self.raw_frames {
                    let px = rgb_pattern(self.width, self.height, (i as u8).wrapping_mul(20));
                    ros::encode_image(
                        i as u32,
                        (t.secs, t.nsecs),
                        self.height,
                        self.width,
                        "rgb8",
                        false,
                        self.width * 3,
                        &px,
                    )
                } else {
                    let img = jpeg(self.width, self.height, (i as u8).wrapping_mul(20));
                    ros::encode_compressed_image(i as u32, (t.secs, t.nsecs), "jpeg", &img)
                };
                video.push(t, payload);
            }
            specs.push(video);
        }
        if self.audio_chunks > 0 {
            let mut audio =
                TopicSpec::new(&self.audio_topic, "audio_common_msgs/AudioData", ros::AUDIO_DATA_DEFINITION);
            for i in 0..self.audio_chunks {
                let bytes: Vec<u8> = self
                    .audio_samples(i)
                    .iter()
                    .flat_map(|s| s.to_le_bytes())
                    .collect();
                audio.push(self.audio_stamp(i), ros::encode_audio(&bytes));
            }
            specs.push(audio);
        }
        specs
    }

    /// Last stamp across both streams minus the first, in ms.
    pub fn expected_observation_ms(&self) -> u64 {
        let last_video = self.frames.checked_sub(1).map(|i| i as u64 * self.frame_interval_ms);
        let last_audio = self
            .audio_chunks
            .checked_sub(1)
            .map(|i| i as u64 * self.audio_interval_ms);
        last_video.into_iter().chain(last_audio).max().unwrap_or(0)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> PathBuf {
        let options = WriteOptions {
            compression: self.compression,
            ..WriteOptions::default()
        };
        write_bag_with(path, &self.specs(), &options).unwrap()
    }
}

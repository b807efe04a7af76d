//! Fast paths for the image and audio message types.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{decode, parse_schema, CodecError, DecodedValue};
use crate::bag::{Connection, TimeStamp};

pub const IMAGE_TYPE: &str = "sensor_msgs/Image";
pub const COMPRESSED_IMAGE_TYPE: &str = "sensor_msgs/CompressedImage";
pub const DEFAULT_AUDIO_TYPES: &[&str] = &["audio_common_msgs/AudioData", "audio_common_msgs/AudioDataStamped"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageFrame {
    pub stamp: TimeStamp,
    pub height: u32,
    pub width: u32,
    pub step: u32,
    /// Pixel encoding for raw images, or `jpeg`/`png`/the format string for
    /// compressed ones.
    pub encoding: String,
    pub is_bigendian: bool,
    pub pixel_data: Vec<u8>,
}

impl ImageFrame {
    pub fn is_compressed(&self) -> bool {
        self.step == 0 && self.height == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioChunk {
    pub stamp: TimeStamp,
    pub data: Vec<u8>,
    pub format_hint: String,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8], CodecError> {
        let available = self.buf.len() - self.pos;
        if available < n {
            return Err(CodecError::Truncated {
                field: field.into(),
                needed: n,
                available,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, field: &str) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u8(&mut self, field: &str) -> Result<u8, CodecError> {
        Ok(self.take(1, field)?[0])
    }

    fn bytes(&mut self, field: &str) -> Result<&'a [u8], CodecError> {
        let n = self.u32(field)? as usize;
        self.take(n, field)
    }

    fn text(&mut self, field: &str) -> Result<String, CodecError> {
        Ok(String::from_utf8_lossy(self.bytes(field)?).into_owned())
    }

    /// std_msgs/Header; returns the stamp.
    fn header(&mut self) -> Result<TimeStamp, CodecError> {
        self.u32("header.seq")?;
        let secs = self.u32("header.stamp")?;
        let nsecs = self.u32("header.stamp")?;
        self.bytes("header.frame_id")?;
        Ok(TimeStamp::new(secs, nsecs))
    }

    fn finish(&self) -> Result<(), CodecError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

/// Decodes `sensor_msgs/Image` or `sensor_msgs/CompressedImage`.
///
/// The header stamp wins; a zero header stamp falls back to `record_stamp`.
pub fn decode_image(conn: &Connection, payload: &[u8], record_stamp: TimeStamp) -> Result<ImageFrame, CodecError> {
    if conn.type_name != IMAGE_TYPE && conn.type_name != COMPRESSED_IMAGE_TYPE {
        return Err(CodecError::TypeMismatch {
            expected: format!("{IMAGE_TYPE} or {COMPRESSED_IMAGE_TYPE}"),
            found: conn.type_name.clone(),
        });
    }
    let mut r = Reader { buf: payload, pos: 0 };
    let header_stamp = r.header()?;
    let stamp = if header_stamp.is_zero() { record_stamp } else { header_stamp };
    match conn.type_name.as_str() {
        IMAGE_TYPE => {
            let height = r.u32("height")?;
            let width = r.u32("width")?;
            let encoding = r.text("encoding")?;
            let is_bigendian = r.u8("is_bigendian")? != 0;
            let step = r.u32("step")?;
            let data = r.bytes("data")?;
            r.finish()?;
            let expected = step as u64 * height as u64;
            if expected != data.len() as u64 {
                return Err(CodecError::SizeMismatch {
                    expected,
                    actual: data.len() as u64,
                });
            }
            let mut pixel_data = data.to_vec();
            let mut big = is_bigendian;
            if is_bigendian {
                if encoding == "mono16" {
                    for px in pixel_data.chunks_exact_mut(2) {
                        px.swap(0, 1);
                    }
                    big = false;
                } else {
                    warn!("{}: big-endian '{}' image passed through unswapped", conn.topic, encoding);
                }
            }
            Ok(ImageFrame {
                stamp,
                height,
                width,
                step,
                encoding,
                is_bigendian: big,
                pixel_data,
            })
        }
        COMPRESSED_IMAGE_TYPE => {
            let format = r.text("format")?;
            let data = r.bytes("data")?;
            r.finish()?;
            let lower = format.to_ascii_lowercase();
            let encoding = if lower.contains("jpeg") || lower.contains("jpg") {
                "jpeg".to_string()
            } else if lower.contains("png") {
                "png".to_string()
            } else {
                format
            };
            Ok(ImageFrame {
                stamp,
                height: 0,
                width: 0,
                step: 0,
                encoding,
                is_bigendian: false,
                pixel_data: data.to_vec(),
            })
        }
        _ => unreachable!(),
    }
}

/// Decodes an audio message using [`DEFAULT_AUDIO_TYPES`].
pub fn decode_audio(conn: &Connection, payload: &[u8], stamp: TimeStamp, format_hint: &str) -> Result<AudioChunk, CodecError> {
    decode_audio_with(conn, payload, stamp, format_hint, DEFAULT_AUDIO_TYPES)
}

/// Decodes an audio message whose type is one of `types`. Types other than
/// plain `AudioData` are decoded generically and the first `data` byte
/// array found is taken.
pub fn decode_audio_with(
    conn: &Connection,
    payload: &[u8],
    stamp: TimeStamp,
    format_hint: &str,
    types: &[&str],
) -> Result<AudioChunk, CodecError> {
    if !types.contains(&conn.type_name.as_str()) {
        return Err(CodecError::TypeMismatch {
            expected: types.join(" | "),
            found: conn.type_name.clone(),
        });
    }
    let data = if conn.type_name == "audio_common_msgs/AudioData" {
        let mut r = Reader { buf: payload, pos: 0 };
        let data = r.bytes("data")?.to_vec();
        r.finish()?;
        data
    } else {
        let schema = parse_schema(&conn.message_definition, &conn.type_name)?;
        let value = decode(&schema, payload)?;
        find_data(&value).ok_or_else(|| CodecError::TypeMismatch {
            expected: "message with a uint8[] data field".into(),
            found: conn.type_name.clone(),
        })?
    };
    if data.is_empty() {
        return Err(CodecError::EmptyAudio);
    }
    Ok(AudioChunk {
        stamp,
        data,
        format_hint: format_hint.to_string(),
    })
}

fn find_data(value: &DecodedValue) -> Option<Vec<u8>> {
    let DecodedValue::Message(fields) = value else {
        return None;
    };
    if let Some(b) = value.get("data").and_then(DecodedValue::as_bytes) {
        return Some(b.to_vec());
    }
    fields.iter().find_map(|(_, v)| find_data(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(out: &mut Vec<u8>, secs: u32) {
        out.extend_from_slice(&[0; 4]);
        out.extend_from_slice(&secs.to_le_bytes());
        out.extend_from_slice(&[0; 4]);
        out.extend_from_slice(&[0; 4]);
    }

    fn mono16(bigendian: bool) -> Vec<u8> {
        let mut p = Vec::new();
        header(&mut p, 7);
        p.extend_from_slice(&1u32.to_le_bytes());
        p.extend_from_slice(&1u32.to_le_bytes());
        p.extend_from_slice(&6u32.to_le_bytes());
        p.extend_from_slice(b"mono16");
        p.push(bigendian as u8);
        p.extend_from_slice(&2u32.to_le_bytes());
        p.extend_from_slice(&2u32.to_le_bytes());
        p.extend_from_slice(&[0x12, 0x34]);
        p
    }

    #[test]
    fn mono16_big_endian_is_swapped() {
        let conn = Connection::new(0, "/depth", IMAGE_TYPE, "");
        let f = decode_image(&conn, &mono16(true), TimeStamp::default()).unwrap();
        assert_eq!(f.pixel_data, vec![0x34, 0x12]);
        assert!(!f.is_bigendian);
        assert_eq!(f.stamp, TimeStamp::new(7, 0));
        let f = decode_image(&conn, &mono16(false), TimeStamp::default()).unwrap();
        assert_eq!(f.pixel_data, vec![0x12, 0x34]);
    }

    #[test]
    fn zero_header_stamp_uses_record_stamp() {
        let mut p = Vec::new();
        header(&mut p, 0);
        p.extend_from_slice(&4u32.to_le_bytes());
        p.extend_from_slice(b"png ");
        p.extend_from_slice(&1u32.to_le_bytes());
        p.push(9);
        let conn = Connection::new(0, "/c", COMPRESSED_IMAGE_TYPE, "");
        let f = decode_image(&conn, &p, TimeStamp::new(3, 5)).unwrap();
        assert_eq!(f.stamp, TimeStamp::new(3, 5));
        assert_eq!(f.encoding, "png");
        assert!(f.is_compressed());
    }

    #[test]
    fn stamped_audio_goes_through_the_generic_decoder() {
        let def = "std_msgs/Header header\naudio_common_msgs/AudioData audio\n\
            ================================================================================\n\
            MSG: std_msgs/Header\nuint32 seq\ntime stamp\nstring frame_id\n\
            ================================================================================\n\
            MSG: audio_common_msgs/AudioData\nuint8[] data\n";
        let conn = Connection::new(0, "/audio", "audio_common_msgs/AudioDataStamped", def);
        let mut p = Vec::new();
        header(&mut p, 1);
        p.extend_from_slice(&3u32.to_le_bytes());
        p.extend_from_slice(&[1, 2, 3]);
        let chunk = decode_audio(&conn, &p, TimeStamp::new(1, 0), "mp3").unwrap();
        assert_eq!(chunk.data, vec![1, 2, 3]);
    }
}

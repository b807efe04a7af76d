//! MJPEG-in-AVI container, written streaming and patched on finish.

use std::fs::File;
use std::io::{self, BufWriter, Seek, SeekFrom, Write};
use std::path::Path;

const AVIF_HASINDEX: u32 = 0x10;
const AVIIF_KEYFRAME: u32 = 0x10;

// byte offsets of fields patched in `finish`
const RIFF_SIZE_AT: u64 = 4;
const AVIH_US_PER_FRAME_AT: u64 = 32;
const AVIH_TOTAL_FRAMES_AT: u64 = 48;
const AVIH_BUFFER_AT: u64 = 60;
const STRH_SCALE_AT: u64 = 128;
const STRH_LENGTH_AT: u64 = 140;
const STRH_BUFFER_AT: u64 = 144;
const MOVI_SIZE_AT: u64 = 216;
const MOVI_DATA_AT: u64 = 224;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AviInfo {
    pub width: u32,
    pub height: u32,
    pub us_per_frame: u32,
    pub frame_count: u32,
}

pub struct AviWriter {
    out: BufWriter<File>,
    /// (offset from the `movi` fourcc, size) per frame
    index: Vec<(u32, u32)>,
    pos: u64,
    max_frame: u32,
}

fn fourcc(out: &mut impl Write, tag: &[u8; 4]) -> io::Result<()> {
    out.write_all(tag)
}

fn u32le(out: &mut impl Write, v: u32) -> io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn u16le(out: &mut impl Write, v: u16) -> io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

impl AviWriter {
    /// The frame period is only known once every stamp has been seen, so it
    /// is supplied to [`AviWriter::finish`].
    pub fn create(path: &Path, width: u32, height: u32) -> io::Result<AviWriter> {
        let mut h = Vec::with_capacity(MOVI_DATA_AT as usize);
        fourcc(&mut h, b"RIFF")?;
        u32le(&mut h, 0)?;
        fourcc(&mut h, b"AVI ")?;

        fourcc(&mut h, b"LIST")?;
        u32le(&mut h, 4 + 8 + 56 + 8 + 4 + 8 + 56 + 8 + 40)?;
        fourcc(&mut h, b"hdrl")?;

        fourcc(&mut h, b"avih")?;
        u32le(&mut h, 56)?;
        u32le(&mut h, 0)?; // us per frame, patched
        u32le(&mut h, 0)?; // max bytes per sec
        u32le(&mut h, 0)?; // padding granularity
        u32le(&mut h, AVIF_HASINDEX)?;
        u32le(&mut h, 0)?; // total frames, patched
        u32le(&mut h, 0)?; // initial frames
        u32le(&mut h, 1)?; // streams
        u32le(&mut h, 0)?; // suggested buffer, patched
        u32le(&mut h, width)?;
        u32le(&mut h, height)?;
        h.extend_from_slice(&[0; 16]);

        fourcc(&mut h, b"LIST")?;
        u32le(&mut h, 4 + 8 + 56 + 8 + 40)?;
        fourcc(&mut h, b"strl")?;

        fourcc(&mut h, b"strh")?;
        u32le(&mut h, 56)?;
        fourcc(&mut h, b"vids")?;
        fourcc(&mut h, b"MJPG")?;
        u32le(&mut h, 0)?; // flags
        u16le(&mut h, 0)?; // priority
        u16le(&mut h, 0)?; // language
        u32le(&mut h, 0)?; // initial frames
        u32le(&mut h, 0)?; // scale, patched
        u32le(&mut h, 1_000_000)?; // rate
        u32le(&mut h, 0)?; // start
        u32le(&mut h, 0)?; // length, patched
        u32le(&mut h, 0)?; // suggested buffer, patched
        u32le(&mut h, u32::MAX)?; // quality
        u32le(&mut h, 0)?; // sample size
        u16le(&mut h, 0)?;
        u16le(&mut h, 0)?;
        u16le(&mut h, width as u16)?;
        u16le(&mut h, height as u16)?;

        fourcc(&mut h, b"strf")?;
        u32le(&mut h, 40)?;
        u32le(&mut h, 40)?;
        u32le(&mut h, width)?;
        u32le(&mut h, height)?;
        u16le(&mut h, 1)?;
        u16le(&mut h, 24)?;
        fourcc(&mut h, b"MJPG")?;
        u32le(&mut h, width.saturating_mul(height).saturating_mul(3))?;
        h.extend_from_slice(&[0; 16]);

        fourcc(&mut h, b"LIST")?;
        u32le(&mut h, 0)?; // movi size, patched
        fourcc(&mut h, b"movi")?;
        debug_assert_eq!(h.len() as u64, MOVI_DATA_AT);

        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(&h)?;
        Ok(AviWriter {
            out,
            index: Vec::new(),
            pos: MOVI_DATA_AT,
            max_frame: 0,
        })
    }

    pub fn push(&mut self, jpeg: &[u8]) -> io::Result<()> {
        let size = u32::try_from(jpeg.len()).map_err(|_| io::Error::other("frame larger than 4 GiB"))?;
        self.index.push(((self.pos - (MOVI_DATA_AT - 4)) as u32, size));
        fourcc(&mut self.out, b"00dc")?;
        u32le(&mut self.out, size)?;
        self.out.write_all(jpeg)?;
        self.pos += 8 + jpeg.len() as u64;
        if jpeg.len() % 2 == 1 {
            self.out.write_all(&[0])?;
            self.pos += 1;
        }
        self.max_frame = self.max_frame.max(size);
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.index.len()
    }

    pub fn finish(mut self, us_per_frame: u32) -> io::Result<()> {
        let movi_size = (self.pos - (MOVI_DATA_AT - 4)) as u32;
        fourcc(&mut self.out, b"idx1")?;
        u32le(&mut self.out, self.index.len() as u32 * 16)?;
        for &(offset, size) in &self.index {
            fourcc(&mut self.out, b"00dc")?;
            u32le(&mut self.out, AVIIF_KEYFRAME)?;
            u32le(&mut self.out, offset)?;
            u32le(&mut self.out, size)?;
        }
        let end = self.pos + 8 + self.index.len() as u64 * 16;
        let frames = self.index.len() as u32;
        let buffer = self.max_frame + 8;
        for (at, value) in [
            (RIFF_SIZE_AT, (end - 8) as u32),
            (AVIH_US_PER_FRAME_AT, us_per_frame),
            (STRH_SCALE_AT, us_per_frame),
            (AVIH_TOTAL_FRAMES_AT, frames),
            (AVIH_BUFFER_AT, buffer),
            (STRH_LENGTH_AT, frames),
            (STRH_BUFFER_AT, buffer),
            (MOVI_SIZE_AT, movi_size),
        ] {
            self.out.seek(SeekFrom::Start(at))?;
            u32le(&mut self.out, value)?;
        }
        self.out.flush()
    }
}

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn le32(b: &[u8], at: usize) -> io::Result<u32> {
    b.get(at..at + 4)
        .map(|s| u32::from_le_bytes(s.try_into().unwrap()))
        .ok_or_else(|| bad("truncated avi"))
}

/// Walks sibling chunks in `b[start..end]`, yielding (fourcc, data range).
fn chunks(b: &[u8], start: usize, end: usize) -> io::Result<Vec<([u8; 4], usize, usize)>> {
    let mut out = Vec::new();
    let mut at = start;
    while at + 8 <= end {
        let tag: [u8; 4] = b[at..at + 4].try_into().unwrap();
        let size = le32(b, at + 4)? as usize;
        let data = at + 8;
        if data + size > end {
            return Err(bad("chunk overruns its parent"));
        }
        out.push((tag, data, data + size));
        at = data + size + (size & 1);
    }
    Ok(out)
}

/// Reads the header and every video frame of an MJPEG AVI.
pub fn read_avi(bytes: &[u8]) -> io::Result<(AviInfo, Vec<Vec<u8>>)> {
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"AVI " {
        return Err(bad("not a RIFF AVI file"));
    }
    let end = (8 + le32(bytes, 4)? as usize).min(bytes.len());
    let mut info = None;
    let mut frames = Vec::new();
    for (tag, s, e) in chunks(bytes, 12, end)? {
        if &tag != b"LIST" || e - s < 4 {
            continue;
        }
        match &bytes[s..s + 4] {
            b"hdrl" => {
                for (t, hs, _) in chunks(bytes, s + 4, e)? {
                    if &t == b"avih" {
                        info = Some(AviInfo {
                            us_per_frame: le32(bytes, hs)?,
                            frame_count: le32(bytes, hs + 16)?,
                            width: le32(bytes, hs + 32)?,
                            height: le32(bytes, hs + 36)?,
                        });
                    }
                }
            }
            b"movi" => {
                for (t, fs, fe) in chunks(bytes, s + 4, e)? {
                    if &t[2..] == b"dc" || &t[2..] == b"db" {
                        frames.push(bytes[fs..fe].to_vec());
                    }
                }
            }
            _ => {}
        }
    }
    let info = info.ok_or_else(|| bad("missing avih header"))?;
    Ok((info, frames))
}

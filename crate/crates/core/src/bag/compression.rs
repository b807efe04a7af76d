//! Chunk payload compression.
//!
//! rosbag's `lz4` chunks are LZ4 frame streams (magic `0x184D2204`), so the
//! frame codec from `lz4_flex` handles them directly.

use std::io::{Read, Write};

use super::BagError;

/// Compression schemes a chunk header may name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    None,
    Lz4,
    Bz2,
}

impl Compression {
    pub fn parse(name: &str) -> Result<Compression, BagError> {
        match name {
            "none" => Ok(Compression::None),
            "lz4" => Ok(Compression::Lz4),
            "bz2" => Ok(Compression::Bz2),
            other => Err(BagError::UnsupportedCompression(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Compression::None => "none",
            Compression::Lz4 => "lz4",
            Compression::Bz2 => "bz2",
        }
    }
}

/// Inflates one chunk body to exactly `expected_size` bytes.
pub fn decompress_chunk(compression: &str, data: &[u8], expected_size: u32) -> Result<Vec<u8>, BagError> {
    let expected = expected_size as usize;
    let out = match Compression::parse(compression)? {
        Compression::None => data.to_vec(),
        Compression::Lz4 => {
            let mut out = Vec::with_capacity(expected);
            lz4_flex::frame::FrameDecoder::new(data)
                .read_to_end(&mut out)
                .map_err(|e| BagError::DecompressError(e.to_string()))?;
            out
        }
        Compression::Bz2 => return Err(BagError::UnsupportedCompression("bz2".into())),
    };
    if out.len() != expected {
        return Err(BagError::DecompressError(format!(
            "chunk inflated to {} bytes, header says {}",
            out.len(),
            expected
        )));
    }
    Ok(out)
}

/// Compresses a chunk body for the fixture writer.
pub(crate) fn compress_chunk(compression: Compression, data: &[u8]) -> Result<Vec<u8>, BagError> {
    match compression {
        Compression::None => Ok(data.to_vec()),
        Compression::Lz4 => {
            let mut enc = lz4_flex::frame::FrameEncoder::new(Vec::new());
            enc.write_all(data)?;
            enc.finish().map_err(|e| BagError::DecompressError(e.to_string()))
        }
        Compression::Bz2 => Err(BagError::UnsupportedCompression("bz2".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn none_is_identity() {
        let b = b"hello chunk".to_vec();
        assert_eq!(decompress_chunk("none", &b, b.len() as u32).unwrap(), b);
    }

    #[test]
    fn none_with_wrong_size_fails() {
        assert!(matches!(
            decompress_chunk("none", b"abc", 4),
            Err(BagError::DecompressError(_))
        ));
    }

    #[test]
    fn bz2_is_rejected() {
        assert!(matches!(
            decompress_chunk("bz2", b"BZh9", 10),
            Err(BagError::UnsupportedCompression(s)) if s == "bz2"
        ));
    }

    #[test]
    fn unknown_scheme_is_rejected() {
        assert!(matches!(
            decompress_chunk("zstd", b"", 0),
            Err(BagError::UnsupportedCompression(_))
        ));
    }

    #[test]
    fn corrupt_lz4_is_a_decompress_error() {
        let garbage = [0x04, 0x22, 0x4d, 0x18, 0xff, 0xff, 0xff, 0x00, 0x01];
        assert!(matches!(
            decompress_chunk("lz4", &garbage, 10),
            Err(BagError::DecompressError(_))
        ));
    }
}

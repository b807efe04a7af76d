//! ROSBag v2.0 reading (and fixture writing).
//!
//! A bag is a 13-byte version line followed by records. Messages live in
//! (optionally compressed) chunks; the index section at `index_pos` holds
//! every connection record and one chunk-info record per chunk, which is
//! enough to answer topic listings and to prune chunks by time or topic
//! without touching the chunk bodies.

mod compression;
mod reader;
pub(crate) mod record;
mod writer;

use std::fmt;
use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compression::{decompress_chunk, Compression};
pub use reader::{open_bag, BagHandle, ChunkInfo, MessageFilter, MessageStream, TopicInfo};
pub use writer::{write_bag, write_bag_with, TopicSpec, WriteOptions};

/// The version line every v2.0 bag starts with.
pub const MAGIC: &[u8; 13] = b"#ROSBAG V2.0\n";

const NANOS_PER_SEC: u32 = 1_000_000_000;

#[derive(Debug, Error)]
pub enum BagError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("not a ROSBag v2.0 file (bad version line)")]
    MalformedMagic,
    #[error("record at offset {offset} is truncated")]
    TruncatedRecord { offset: u64 },
    #[error("record header is missing field '{0}'")]
    MissingField(String),
    #[error("bad header field '{field}': {reason}")]
    BadField { field: String, reason: String },
    #[error("unexpected record op {found:#04x} at offset {offset}, expected {expected:#04x}")]
    UnexpectedRecord { offset: u64, expected: u8, found: u8 },
    #[error("unsupported chunk compression '{0}'")]
    UnsupportedCompression(String),
    #[error("chunk decompression failed: {0}")]
    DecompressError(String),
    #[error("time range start is after its end")]
    InvalidRange,
}

/// ROS wire time: seconds and nanoseconds since the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct TimeStamp {
    pub secs: u32,
    pub nsecs: u32,
}

impl TimeStamp {
    /// Builds a timestamp, carrying excess nanoseconds into seconds.
    pub fn new(secs: u32, nsecs: u32) -> TimeStamp {
        TimeStamp {
            secs: secs + nsecs / NANOS_PER_SEC,
            nsecs: nsecs % NANOS_PER_SEC,
        }
    }

    pub fn from_nanos(nanos: u64) -> TimeStamp {
        TimeStamp {
            secs: (nanos / NANOS_PER_SEC as u64) as u32,
            nsecs: (nanos % NANOS_PER_SEC as u64) as u32,
        }
    }

    pub fn from_millis(ms: u64) -> TimeStamp {
        TimeStamp::from_nanos(ms * 1_000_000)
    }

    pub fn as_nanos(self) -> u64 {
        self.secs as u64 * NANOS_PER_SEC as u64 + self.nsecs as u64
    }

    /// Whole milliseconds elapsed from `origin`, saturating at zero.
    pub fn millis_since(self, origin: TimeStamp) -> u64 {
        self.as_nanos().saturating_sub(origin.as_nanos()) / 1_000_000
    }

    pub fn is_zero(self) -> bool {
        self.secs == 0 && self.nsecs == 0
    }

    pub(crate) fn from_wire(b: [u8; 8]) -> TimeStamp {
        let secs = u32::from_le_bytes(b[..4].try_into().unwrap());
        let nsecs = u32::from_le_bytes(b[4..].try_into().unwrap());
        TimeStamp::new(secs, nsecs)
    }

    pub(crate) fn to_wire(self) -> [u8; 8] {
        let mut out = [0u8; 8];
        out[..4].copy_from_slice(&self.secs.to_le_bytes());
        out[4..].copy_from_slice(&self.nsecs.to_le_bytes());
        out
    }
}

impl fmt::Display for TimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.secs, self.nsecs)
    }
}

/// A connection record: binds a numeric id to a topic and its message type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connection {
    pub conn_id: u32,
    pub topic: String,
    pub type_name: String,
    pub md5sum: String,
    pub message_definition: String,
    pub callerid: Option<String>,
    pub latching: Option<bool>,
}

impl Connection {
    /// Convenience constructor used by decoders and tests.
    pub fn new(conn_id: u32, topic: &str, type_name: &str, message_definition: &str) -> Connection {
        Connection {
            conn_id,
            topic: topic.to_string(),
            type_name: type_name.to_string(),
            md5sum: "*".to_string(),
            message_definition: message_definition.to_string(),
            callerid: None,
            latching: None,
        }
    }
}

/// One message record, payload exactly as stored in the bag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawMessage {
    pub conn_id: u32,
    pub stamp: TimeStamp,
    pub payload: Vec<u8>,
}

/// Where a bag came from; kept on the handle for diagnostics.
pub(crate) type BagPath = PathBuf;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_normalizes_and_orders() {
        let t = TimeStamp::new(1, 1_500_000_000);
        assert_eq!(t, TimeStamp { secs: 2, nsecs: 500_000_000 });
        assert!(TimeStamp::new(1, 999_999_999) < TimeStamp::new(2, 0));
        assert_eq!(TimeStamp::from_nanos(t.as_nanos()), t);
    }

    #[test]
    fn millis_since_saturates() {
        let a = TimeStamp::new(10, 0);
        let b = TimeStamp::new(10, 33_000_000);
        assert_eq!(b.millis_since(a), 33);
        assert_eq!(a.millis_since(b), 0);
    }

    #[test]
    fn wire_round_trip() {
        let t = TimeStamp::new(1_700_000_000, 123_456_789);
        assert_eq!(TimeStamp::from_wire(t.to_wire()), t);
    }
}

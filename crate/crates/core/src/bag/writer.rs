//! Fixture writer. Produces well-formed v2.0 bags for tests and benches;
//! not meant for production recording.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::compression::{compress_chunk, Compression};
use super::record::{
    push_record, HeaderBuilder, OP_BAG_HEADER, OP_CHUNK, OP_CHUNK_INFO, OP_CONNECTION,
    OP_INDEX_DATA, OP_MESSAGE_DATA,
};
use super::{BagError, TimeStamp, MAGIC};

const BAG_HEADER_RECORD_LEN: usize = 4096;
const DEFAULT_CHUNK_THRESHOLD: usize = 4096;

/// One connection's worth of messages to write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicSpec {
    pub topic: String,
    pub type_name: String,
    pub md5sum: String,
    pub message_definition: String,
    pub callerid: Option<String>,
    pub messages: Vec<(TimeStamp, Vec<u8>)>,
}

impl TopicSpec {
    pub fn new(topic: &str, type_name: &str, message_definition: &str) -> TopicSpec {
        TopicSpec {
            topic: topic.to_string(),
            type_name: type_name.to_string(),
            md5sum: "*".to_string(),
            message_definition: message_definition.to_string(),
            callerid: None,
            messages: Vec::new(),
        }
    }

    pub fn with_callerid(mut self, callerid: &str) -> Self {
        self.callerid = Some(callerid.to_string());
        self
    }

    pub fn push(&mut self, stamp: TimeStamp, payload: impl Into<Vec<u8>>) {
        self.messages.push((stamp, payload.into()));
    }
}

#[derive(Debug, Clone)]
pub struct WriteOptions {
    /// Split into chunks of roughly `chunk_threshold` uncompressed bytes;
    /// when false every message goes into a single chunk.
    pub chunked: bool,
    pub chunk_threshold: usize,
    pub compression: Compression,
    /// When false the index section is omitted and `index_pos` stays 0, as
    /// in a recording that crashed before closing.
    pub write_index: bool,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions {
            chunked: true,
            chunk_threshold: DEFAULT_CHUNK_THRESHOLD,
            compression: Compression::None,
            write_index: true,
        }
    }
}

/// Writes `specs` to `path`. Connection ids follow the order of `specs`.
pub fn write_bag(
    path: impl AsRef<Path>,
    specs: &[TopicSpec],
    chunked: bool,
    compression: &str,
) -> Result<PathBuf, BagError> {
    let options = WriteOptions {
        chunked,
        compression: Compression::parse(compression)?,
        ..WriteOptions::default()
    };
    write_bag_with(path, specs, &options)
}

pub fn write_bag_with(
    path: impl AsRef<Path>,
    specs: &[TopicSpec],
    options: &WriteOptions,
) -> Result<PathBuf, BagError> {
    let path = path.as_ref();
    if options.compression == Compression::Bz2 {
        return Err(BagError::UnsupportedCompression("bz2".into()));
    }
    fs::write(path, encode_bag(specs, options)?)?;
    Ok(path.to_path_buf())
}

struct ChunkBuilder {
    body: Vec<u8>,
    start: Option<TimeStamp>,
    end: TimeStamp,
    // conn -> (time, offset within body)
    index: BTreeMap<u32, Vec<(TimeStamp, u32)>>,
}

impl ChunkBuilder {
    fn new() -> Self {
        ChunkBuilder {
            body: Vec::new(),
            start: None,
            end: TimeStamp::default(),
            index: BTreeMap::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

fn connection_record(out: &mut Vec<u8>, conn_id: u32, spec: &TopicSpec) {
    let header = HeaderBuilder::new()
        .op(OP_CONNECTION)
        .u32("conn", conn_id)
        .field("topic", spec.topic.as_bytes())
        .finish();
    let mut data = HeaderBuilder::new()
        .field("topic", spec.topic.as_bytes())
        .field("type", spec.type_name.as_bytes())
        .field("md5sum", spec.md5sum.as_bytes())
        .field("message_definition", spec.message_definition.as_bytes());
    if let Some(callerid) = &spec.callerid {
        data = data.field("callerid", callerid.as_bytes());
    }
    push_record(out, &header, &data.finish());
}

struct ChunkSummary {
    offset: u64,
    start: TimeStamp,
    end: TimeStamp,
    counts: Vec<(u32, u32)>,
}

fn flush_chunk(
    out: &mut Vec<u8>,
    chunk: ChunkBuilder,
    compression: Compression,
) -> Result<ChunkSummary, BagError> {
    let offset = out.len() as u64;
    let compressed = compress_chunk(compression, &chunk.body)?;
    let header = HeaderBuilder::new()
        .op(OP_CHUNK)
        .field("compression", compression.as_str().as_bytes())
        .u32("size", chunk.body.len() as u32)
        .finish();
    push_record(out, &header, &compressed);

    let mut counts = Vec::new();
    for (conn, entries) in &chunk.index {
        let header = HeaderBuilder::new()
            .op(OP_INDEX_DATA)
            .u32("ver", 1)
            .u32("conn", *conn)
            .u32("count", entries.len() as u32)
            .finish();
        let mut data = Vec::with_capacity(entries.len() * 12);
        for (t, off) in entries {
            data.extend_from_slice(&t.to_wire());
            data.extend_from_slice(&off.to_le_bytes());
        }
        push_record(out, &header, &data);
        counts.push((*conn, entries.len() as u32));
    }
    Ok(ChunkSummary {
        offset,
        start: chunk.start.unwrap_or_default(),
        end: chunk.end,
        counts,
    })
}

fn encode_bag(specs: &[TopicSpec], options: &WriteOptions) -> Result<Vec<u8>, BagError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let header_pos = out.len();
    out.resize(header_pos + BAG_HEADER_RECORD_LEN, 0);

    // Global time order; the stable sort keeps per-connection order on ties.
    let mut all: Vec<(TimeStamp, u32, &[u8])> = specs
        .iter()
        .enumerate()
        .flat_map(|(conn, spec)| {
            spec.messages
                .iter()
                .map(move |(t, p)| (*t, conn as u32, p.as_slice()))
        })
        .collect();
    all.sort_by_key(|(t, _, _)| *t);

    let mut summaries = Vec::new();
    let mut chunk = ChunkBuilder::new();
    for (stamp, conn, payload) in all {
        if !chunk.index.contains_key(&conn) {
            connection_record(&mut chunk.body, conn, &specs[conn as usize]);
        }
        let offset = chunk.body.len() as u32;
        let header = HeaderBuilder::new()
            .op(OP_MESSAGE_DATA)
            .u32("conn", conn)
            .time("time", stamp)
            .finish();
        push_record(&mut chunk.body, &header, payload);
        chunk.start = Some(chunk.start.map_or(stamp, |s| s.min(stamp)));
        chunk.end = chunk.end.max(stamp);
        chunk.index.entry(conn).or_default().push((stamp, offset));

        if options.chunked && chunk.body.len() >= options.chunk_threshold {
            let full = std::mem::replace(&mut chunk, ChunkBuilder::new());
            summaries.push(flush_chunk(&mut out, full, options.compression)?);
        }
    }
    if !chunk.is_empty() {
        summaries.push(flush_chunk(&mut out, chunk, options.compression)?);
    }

    let index_pos = if options.write_index {
        let pos = out.len() as u64;
        for (conn, spec) in specs.iter().enumerate() {
            connection_record(&mut out, conn as u32, spec);
        }
        for s in &summaries {
            let header = HeaderBuilder::new()
                .op(OP_CHUNK_INFO)
                .u32("ver", 1)
                .u64("chunk_pos", s.offset)
                .time("start_time", s.start)
                .time("end_time", s.end)
                .u32("count", s.counts.len() as u32)
                .finish();
            let mut data = Vec::with_capacity(s.counts.len() * 8);
            for (conn, n) in &s.counts {
                data.extend_from_slice(&conn.to_le_bytes());
                data.extend_from_slice(&n.to_le_bytes());
            }
            push_record(&mut out, &header, &data);
        }
        pos
    } else {
        0
    };

    let header = HeaderBuilder::new()
        .op(OP_BAG_HEADER)
        .u64("index_pos", index_pos)
        .u32("conn_count", specs.len() as u32)
        .u32("chunk_count", summaries.len() as u32)
        .finish();
    let padding = BAG_HEADER_RECORD_LEN - 8 - header.len();
    let mut record = Vec::with_capacity(BAG_HEADER_RECORD_LEN);
    push_record(&mut record, &header, &vec![b' '; padding]);
    out[header_pos..header_pos + BAG_HEADER_RECORD_LEN].copy_from_slice(&record);
    Ok(out)
}

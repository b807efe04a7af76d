use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::compression::decompress_chunk;
use super::record::{
    read_u32, Header, RecordIter, OP_BAG_HEADER, OP_CHUNK, OP_CHUNK_INFO, OP_CONNECTION,
    OP_MESSAGE_DATA,
};
use super::{BagError, BagPath, Connection, RawMessage, TimeStamp, MAGIC};
use crate::exec::Exec;

/// Summary of one chunk, from a chunk-info record or a recovery scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkInfo {
    /// Absolute file offset of the chunk record.
    pub offset: u64,
    pub start: TimeStamp,
    pub end: TimeStamp,
    /// Message count per connection id.
    pub counts: BTreeMap<u32, u32>,
}

impl ChunkInfo {
    fn overlaps(&self, range: Option<(TimeStamp, TimeStamp)>) -> bool {
        match range {
            Some((lo, hi)) => self.end >= lo && self.start <= hi,
            None => true,
        }
    }

    fn has_any(&self, conns: Option<&BTreeSet<u32>>) -> bool {
        match conns {
            Some(set) => self.counts.keys().any(|c| set.contains(c)),
            None => true,
        }
    }
}

/// Per-topic listing entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicInfo {
    pub topic: String,
    pub type_name: String,
    pub md5sum: String,
    pub message_count: u64,
}

/// An opened bag. Immutable once built, so it can be shared across threads;
/// every message stream opens its own file cursor.
#[derive(Debug, Clone)]
pub struct BagHandle {
    path: BagPath,
    connections: BTreeMap<u32, Connection>,
    chunks: Vec<ChunkInfo>,
    message_count: u64,
    time_span: Option<(TimeStamp, TimeStamp)>,
    reindexed: bool,
}

/// Topic and time restrictions for [`BagHandle::read_messages`].
#[derive(Debug, Clone, Default)]
pub struct MessageFilter {
    pub topics: Option<BTreeSet<String>>,
    /// Inclusive on both ends.
    pub range: Option<(TimeStamp, TimeStamp)>,
}

impl MessageFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn topics<I, S>(topics: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MessageFilter {
            topics: Some(topics.into_iter().map(Into::into).collect()),
            range: None,
        }
    }

    pub fn with_range(mut self, start: TimeStamp, end: TimeStamp) -> Self {
        self.range = Some((start, end));
        self
    }
}

/// Opens a bag, loading its connection table and chunk index.
///
/// Uses the index section when `index_pos` points at one; otherwise (a
/// crashed recording, or an index that fails to parse) every chunk is
/// scanned and the handle is flagged as [`BagHandle::reindexed`].
pub fn open_bag(path: impl AsRef<Path>) -> Result<BagHandle, BagError> {
    let path = path.as_ref();
    let mut file = File::open(path)?;
    let file_len = file.metadata()?.len();

    let mut magic = [0u8; 13];
    if file_len < MAGIC.len() as u64 {
        return Err(BagError::MalformedMagic);
    }
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(BagError::MalformedMagic);
    }

    let header_offset = MAGIC.len() as u64;
    let (bag_header, header_record_len) = read_record_header(&mut file, header_offset, file_len)?;
    let op = bag_header.op()?;
    if op != OP_BAG_HEADER {
        return Err(BagError::UnexpectedRecord {
            offset: header_offset,
            expected: OP_BAG_HEADER,
            found: op,
        });
    }
    let index_pos = bag_header.u64("index_pos")?;
    let conn_count = bag_header.u32("conn_count")?;
    let chunk_count = bag_header.u32("chunk_count")?;
    let body_start = header_offset + header_record_len;

    let indexed = if index_pos >= body_start && index_pos <= file_len {
        match read_index(&mut file, index_pos, file_len) {
            Ok((conns, chunks))
                if conns.len() == conn_count as usize
                    && chunks.len() == chunk_count as usize
                    && chunks.iter().all(|c| c.offset >= body_start && c.offset < index_pos) =>
            {
                Some((conns, chunks))
            }
            Ok(_) => {
                log::warn!("{}: index counts disagree with bag header; rescanning", path.display());
                None
            }
            Err(e) => {
                log::warn!("{}: unreadable index ({e}); rescanning", path.display());
                None
            }
        }
    } else {
        None
    };

    let reindexed = indexed.is_none();
    let (connections, mut chunks) = match indexed {
        Some(found) => found,
        None => scan_chunks(&mut file, body_start, file_len)?,
    };
    // stable: ties keep file order
    chunks.sort_by_key(|c| c.start);

    let message_count = chunks
        .iter()
        .flat_map(|c| c.counts.values())
        .map(|&n| n as u64)
        .sum();
    let time_span = if message_count == 0 {
        None
    } else {
        let first = chunks.iter().map(|c| c.start).min().unwrap();
        let last = chunks.iter().map(|c| c.end).max().unwrap();
        Some((first, last))
    };

    Ok(BagHandle {
        path: path.to_path_buf(),
        connections,
        chunks,
        message_count,
        time_span,
        reindexed,
    })
}

/// Reads a record header at `offset` and returns it with the full record
/// length (header + data). The file cursor is left after the data.
fn read_record_header(file: &mut File, offset: u64, file_len: u64) -> Result<(Header, u64), BagError> {
    let truncated = BagError::TruncatedRecord { offset };
    file.seek(SeekFrom::Start(offset))?;
    let header_len = read_len(file).map_err(|_| BagError::TruncatedRecord { offset })? as u64;
    if offset + 8 + header_len > file_len {
        return Err(truncated);
    }
    let mut header = vec![0u8; header_len as usize];
    file.read_exact(&mut header)?;
    let data_len = read_len(file).map_err(|_| BagError::TruncatedRecord { offset })? as u64;
    let total = 8 + header_len + data_len;
    if offset + total > file_len {
        return Err(truncated);
    }
    file.seek(SeekFrom::Current(data_len as i64))?;
    Ok((Header::parse(&header)?, total))
}

fn read_len(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn parse_connection(header: &Header, data: &[u8]) -> Result<Connection, BagError> {
    let conn_id = header.u32("conn")?;
    let topic = header.text("topic")?;
    let fields = Header::parse(data)?;
    Ok(Connection {
        conn_id,
        topic,
        type_name: fields.text("type")?,
        md5sum: fields.text("md5sum").unwrap_or_default(),
        message_definition: fields.text("message_definition").unwrap_or_default(),
        callerid: fields
            .opt_bytes("callerid")
            .map(|b| String::from_utf8_lossy(b).into_owned()),
        latching: fields.opt_bytes("latching").map(|b| b == b"1"),
    })
}

fn parse_chunk_info(header: &Header, data: &[u8]) -> Result<ChunkInfo, BagError> {
    let ver = header.u32("ver")?;
    if ver != 1 {
        return Err(BagError::BadField {
            field: "ver".into(),
            reason: format!("chunk info version {ver}"),
        });
    }
    let count = header.u32("count")? as usize;
    if data.len() < count * 8 {
        return Err(BagError::BadField {
            field: "count".into(),
            reason: "chunk info data shorter than count".into(),
        });
    }
    let counts = (0..count)
        .map(|i| (read_u32(data, i * 8).unwrap(), read_u32(data, i * 8 + 4).unwrap()))
        .collect();
    Ok(ChunkInfo {
        offset: header.u64("chunk_pos")?,
        start: header.time("start_time")?,
        end: header.time("end_time")?,
        counts,
    })
}

type IndexTables = (BTreeMap<u32, Connection>, Vec<ChunkInfo>);

fn read_index(file: &mut File, index_pos: u64, file_len: u64) -> Result<IndexTables, BagError> {
    file.seek(SeekFrom::Start(index_pos))?;
    let mut buf = Vec::with_capacity((file_len - index_pos) as usize);
    file.read_to_end(&mut buf)?;
    let mut connections = BTreeMap::new();
    let mut chunks = Vec::new();
    for record in RecordIter::new(&buf, index_pos) {
        let record = record?;
        match record.header.op()? {
            OP_CONNECTION => {
                let conn = parse_connection(&record.header, record.data)?;
                connections.insert(conn.conn_id, conn);
            }
            OP_CHUNK_INFO => chunks.push(parse_chunk_info(&record.header, record.data)?),
            _ => {}
        }
    }
    Ok((connections, chunks))
}

/// Recovery path: walk every top-level record, inflating chunks to rebuild
/// the connection table and chunk summaries. A truncated tail (the usual
/// crash signature) ends the scan without an error.
fn scan_chunks(file: &mut File, start: u64, file_len: u64) -> Result<IndexTables, BagError> {
    let mut connections = BTreeMap::new();
    let mut chunks = Vec::new();
    let mut offset = start;
    while offset < file_len {
        let header = match read_record_header(file, offset, file_len) {
            Ok((header, len)) => {
                let record_offset = offset;
                offset += len;
                (header, record_offset)
            }
            Err(BagError::TruncatedRecord { offset }) => {
                log::warn!("bag truncated at offset {offset}; keeping {} chunks", chunks.len());
                break;
            }
            Err(e) => return Err(e),
        };
        let (header, record_offset) = header;
        match header.op()? {
            OP_CHUNK => {
                let body = read_chunk_body(file, record_offset)?;
                let mut info = ChunkInfo {
                    offset: record_offset,
                    start: TimeStamp { secs: u32::MAX, nsecs: 0 },
                    end: TimeStamp::default(),
                    counts: BTreeMap::new(),
                };
                for inner in RecordIter::new(&body, 0) {
                    let inner = inner?;
                    match inner.header.op()? {
                        OP_CONNECTION => {
                            let conn = parse_connection(&inner.header, inner.data)?;
                            connections.entry(conn.conn_id).or_insert(conn);
                        }
                        OP_MESSAGE_DATA => {
                            let stamp = inner.header.time("time")?;
                            info.start = info.start.min(stamp);
                            info.end = info.end.max(stamp);
                            *info.counts.entry(inner.header.u32("conn")?).or_default() += 1;
                        }
                        _ => {}
                    }
                }
                if !info.counts.is_empty() {
                    chunks.push(info);
                }
            }
            OP_CONNECTION => {
                let data = read_record_data(file, record_offset)?;
                let conn = parse_connection(&header, &data)?;
                connections.entry(conn.conn_id).or_insert(conn);
            }
            _ => {}
        }
    }
    Ok((connections, chunks))
}

fn read_record_data(file: &mut File, offset: u64) -> Result<Vec<u8>, BagError> {
    file.seek(SeekFrom::Start(offset))?;
    let header_len = read_len(file)?;
    file.seek(SeekFrom::Current(header_len as i64))?;
    let data_len = read_len(file)?;
    let mut data = vec![0u8; data_len as usize];
    file.read_exact(&mut data)?;
    Ok(data)
}

/// Reads and inflates the chunk record at `offset`.
fn read_chunk_body(file: &mut File, offset: u64) -> Result<Vec<u8>, BagError> {
    file.seek(SeekFrom::Start(offset))?;
    let mut reader = BufReader::new(file);
    let header_len = read_len(&mut reader).map_err(|_| BagError::TruncatedRecord { offset })?;
    let mut header = vec![0u8; header_len as usize];
    reader
        .read_exact(&mut header)
        .map_err(|_| BagError::TruncatedRecord { offset })?;
    let header = Header::parse(&header)?;
    let op = header.op()?;
    if op != OP_CHUNK {
        return Err(BagError::UnexpectedRecord {
            offset,
            expected: OP_CHUNK,
            found: op,
        });
    }
    let data_len = read_len(&mut reader).map_err(|_| BagError::TruncatedRecord { offset })?;
    let mut data = vec![0u8; data_len as usize];
    reader
        .read_exact(&mut data)
        .map_err(|_| BagError::TruncatedRecord { offset })?;
    decompress_chunk(&header.text("compression")?, &data, header.u32("size")?)
}

/// Extracts the messages of one chunk that pass the filter, in record order.
fn load_chunk(
    file: &mut File,
    chunk: &ChunkInfo,
    conns: Option<&BTreeSet<u32>>,
    range: Option<(TimeStamp, TimeStamp)>,
    known: &BTreeMap<u32, Connection>,
) -> Result<Vec<RawMessage>, BagError> {
    let body = read_chunk_body(file, chunk.offset)?;
    let mut out = Vec::new();
    for record in RecordIter::new(&body, chunk.offset) {
        let record = record?;
        if record.header.op()? != OP_MESSAGE_DATA {
            continue;
        }
        let conn_id = record.header.u32("conn")?;
        if conns.is_some_and(|set| !set.contains(&conn_id)) {
            continue;
        }
        if !known.contains_key(&conn_id) {
            log::warn!("message for unknown connection {conn_id} skipped");
            continue;
        }
        let stamp = record.header.time("time")?;
        if let Some((lo, hi)) = range {
            if stamp < lo || stamp > hi {
                continue;
            }
        }
        out.push(RawMessage {
            conn_id,
            stamp,
            payload: record.data.to_vec(),
        });
    }
    Ok(out)
}

impl BagHandle {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn connections(&self) -> &BTreeMap<u32, Connection> {
        &self.connections
    }

    pub fn connection(&self, conn_id: u32) -> Option<&Connection> {
        self.connections.get(&conn_id)
    }

    /// Chunk summaries, sorted by start time.
    pub fn chunks(&self) -> &[ChunkInfo] {
        &self.chunks
    }

    pub fn message_count(&self) -> u64 {
        self.message_count
    }

    /// First and last message stamps; `None` for an empty bag.
    pub fn time_span(&self) -> Option<(TimeStamp, TimeStamp)> {
        self.time_span
    }

    /// True when the index was missing or unreadable and was rebuilt by scan.
    pub fn reindexed(&self) -> bool {
        self.reindexed
    }

    /// Connections carrying `topic` (there may be several, one per publisher).
    pub fn connections_for(&self, topic: &str) -> Vec<&Connection> {
        self.connections.values().filter(|c| c.topic == topic).collect()
    }

    /// One entry per distinct topic, ordered by topic name. Duplicate
    /// connections on the same topic are merged, taking type and md5 from the
    /// lowest connection id.
    pub fn list_topics(&self) -> Vec<TopicInfo> {
        let mut per_conn: BTreeMap<u32, u64> = BTreeMap::new();
        for chunk in &self.chunks {
            for (&conn, &n) in &chunk.counts {
                *per_conn.entry(conn).or_default() += n as u64;
            }
        }
        let mut topics: BTreeMap<&str, TopicInfo> = BTreeMap::new();
        for conn in self.connections.values() {
            let entry = topics.entry(&conn.topic).or_insert_with(|| TopicInfo {
                topic: conn.topic.clone(),
                type_name: conn.type_name.clone(),
                md5sum: conn.md5sum.clone(),
                message_count: 0,
            });
            entry.message_count += per_conn.get(&conn.conn_id).copied().unwrap_or(0);
        }
        topics.into_values().collect()
    }

    fn resolve_filter(&self, filter: &MessageFilter) -> Result<Option<BTreeSet<u32>>, BagError> {
        if let Some((lo, hi)) = filter.range {
            if lo > hi {
                return Err(BagError::InvalidRange);
            }
        }
        Ok(filter.topics.as_ref().map(|topics| {
            self.connections
                .values()
                .filter(|c| topics.contains(&c.topic))
                .map(|c| c.conn_id)
                .collect()
        }))
    }

    fn selected_chunks(&self, conns: Option<&BTreeSet<u32>>, filter: &MessageFilter) -> Vec<usize> {
        self.chunks
            .iter()
            .enumerate()
            .filter(|(_, c)| c.overlaps(filter.range) && c.has_any(conns))
            .map(|(i, _)| i)
            .collect()
    }

    /// Streams messages in nondecreasing stamp order. Only chunks whose time
    /// span intersects the range (and that carry a wanted connection) are
    /// read and inflated.
    pub fn read_messages(&self, filter: &MessageFilter) -> Result<MessageStream<'_>, BagError> {
        let conns = self.resolve_filter(filter)?;
        let pending = self.selected_chunks(conns.as_ref(), filter);
        Ok(MessageStream {
            handle: self,
            file: File::open(&self.path)?,
            conns,
            range: filter.range,
            pending,
            next: 0,
            heap: BinaryHeap::new(),
            seq: 0,
            chunks_loaded: 0,
            failed: false,
        })
    }

    /// Collects every matching message at once, inflating chunks with the
    /// given execution mode. Output order matches [`Self::read_messages`].
    pub fn collect_messages(&self, filter: &MessageFilter, exec: Exec) -> Result<Vec<RawMessage>, BagError> {
        let conns = self.resolve_filter(filter)?;
        let selected = self.selected_chunks(conns.as_ref(), filter);
        let per_chunk = exec.try_map(&selected, |&i| {
            let mut file = File::open(&self.path)?;
            load_chunk(&mut file, &self.chunks[i], conns.as_ref(), filter.range, &self.connections)
        })?;
        let mut all: Vec<RawMessage> = per_chunk.into_iter().flatten().collect();
        all.sort_by_key(|m| m.stamp);
        Ok(all)
    }
}

/// Ordered message iterator returned by [`BagHandle::read_messages`].
///
/// Chunks are visited in start-time order and merged through a heap, so
/// overlapping chunks still yield a globally ordered stream. Equal stamps
/// keep chunk order, then record order.
pub struct MessageStream<'h> {
    handle: &'h BagHandle,
    file: File,
    conns: Option<BTreeSet<u32>>,
    range: Option<(TimeStamp, TimeStamp)>,
    pending: Vec<usize>,
    next: usize,
    heap: BinaryHeap<Reverse<HeapEntry>>,
    seq: u64,
    chunks_loaded: usize,
    failed: bool,
}

struct HeapEntry {
    stamp: TimeStamp,
    seq: u64,
    msg: RawMessage,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        (self.stamp, self.seq) == (other.stamp, other.seq)
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.stamp, self.seq).cmp(&(other.stamp, other.seq))
    }
}

impl MessageStream<'_> {
    /// Number of chunks inflated so far.
    pub fn chunks_loaded(&self) -> usize {
        self.chunks_loaded
    }

    fn load_next_chunk(&mut self) -> Result<(), BagError> {
        let chunk = &self.handle.chunks[self.pending[self.next]];
        self.next += 1;
        self.chunks_loaded += 1;
        let msgs = load_chunk(
            &mut self.file,
            chunk,
            self.conns.as_ref(),
            self.range,
            &self.handle.connections,
        )?;
        for msg in msgs {
            self.heap.push(Reverse(HeapEntry {
                stamp: msg.stamp,
                seq: self.seq,
                msg,
            }));
            self.seq += 1;
        }
        Ok(())
    }
}

impl Iterator for MessageStream<'_> {
    type Item = Result<RawMessage, BagError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let next_start = self
                .pending
                .get(self.next)
                .map(|&i| self.handle.chunks[i].start);
            let ready = match (self.heap.peek(), next_start) {
                (Some(Reverse(top)), Some(start)) => top.stamp <= start,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => return None,
            };
            if ready {
                return self.heap.pop().map(|Reverse(e)| Ok(e.msg));
            }
            if let Err(e) = self.load_next_chunk() {
                self.failed = true;
                return Some(Err(e));
            }
        }
    }
}

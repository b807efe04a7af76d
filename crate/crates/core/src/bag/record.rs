//! Low-level record framing: `header_len | header | data_len | data`.

use std::collections::BTreeMap;

use super::{BagError, TimeStamp};

pub(crate) const OP_MESSAGE_DATA: u8 = 0x02;
pub(crate) const OP_BAG_HEADER: u8 = 0x03;
pub(crate) const OP_INDEX_DATA: u8 = 0x04;
pub(crate) const OP_CHUNK: u8 = 0x05;
pub(crate) const OP_CHUNK_INFO: u8 = 0x06;
pub(crate) const OP_CONNECTION: u8 = 0x07;

/// Parsed record header: field name to raw value bytes.
#[derive(Debug, Clone, Default)]
pub(crate) struct Header {
    fields: BTreeMap<String, Vec<u8>>,
}

impl Header {
    pub(crate) fn parse(mut bytes: &[u8]) -> Result<Header, BagError> {
        let mut fields = BTreeMap::new();
        while !bytes.is_empty() {
            let len = read_u32(bytes, 0).ok_or_else(|| BagError::BadField {
                field: "<header>".into(),
                reason: "field length truncated".into(),
            })? as usize;
            bytes = &bytes[4..];
            if len > bytes.len() {
                return Err(BagError::BadField {
                    field: "<header>".into(),
                    reason: format!("field of {len} bytes overruns header"),
                });
            }
            let (field, rest) = bytes.split_at(len);
            bytes = rest;
            let eq = field.iter().position(|&b| b == b'=').ok_or_else(|| BagError::BadField {
                field: "<header>".into(),
                reason: "field without '='".into(),
            })?;
            let name = String::from_utf8_lossy(&field[..eq]).into_owned();
            fields.insert(name, field[eq + 1..].to_vec());
        }
        Ok(Header { fields })
    }

    pub(crate) fn bytes(&self, name: &str) -> Result<&[u8], BagError> {
        self.fields
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| BagError::MissingField(name.to_string()))
    }

    pub(crate) fn opt_bytes(&self, name: &str) -> Option<&[u8]> {
        self.fields.get(name).map(Vec::as_slice)
    }

    pub(crate) fn op(&self) -> Result<u8, BagError> {
        match self.bytes("op")? {
            [op] => Ok(*op),
            _ => Err(bad("op", "expected 1 byte")),
        }
    }

    pub(crate) fn u32(&self, name: &str) -> Result<u32, BagError> {
        let b = self.bytes(name)?;
        if b.len() != 4 {
            return Err(bad(name, "expected 4 bytes"));
        }
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn u64(&self, name: &str) -> Result<u64, BagError> {
        let b = self.bytes(name)?;
        if b.len() != 8 {
            return Err(bad(name, "expected 8 bytes"));
        }
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn time(&self, name: &str) -> Result<TimeStamp, BagError> {
        let b = self.bytes(name)?;
        if b.len() != 8 {
            return Err(bad(name, "expected 8 bytes"));
        }
        Ok(TimeStamp::from_wire(b.try_into().unwrap()))
    }

    pub(crate) fn text(&self, name: &str) -> Result<String, BagError> {
        Ok(String::from_utf8_lossy(self.bytes(name)?).into_owned())
    }
}

fn bad(field: &str, reason: &str) -> BagError {
    BagError::BadField {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

pub(crate) fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
}

/// A record located inside an in-memory buffer.
#[derive(Debug)]
pub(crate) struct RecordRef<'a> {
    pub(crate) header: Header,
    pub(crate) data: &'a [u8],
}

/// Iterates over consecutive records in a buffer (chunk bodies, index
/// sections). Stops with `TruncatedRecord` if a record overruns the buffer.
pub(crate) struct RecordIter<'a> {
    buf: &'a [u8],
    pos: usize,
    base: u64,
}

impl<'a> RecordIter<'a> {
    /// `base` is the absolute file offset of `buf[0]`, used in errors.
    pub(crate) fn new(buf: &'a [u8], base: u64) -> Self {
        RecordIter { buf, pos: 0, base }
    }
}

impl<'a> Iterator for RecordIter<'a> {
    type Item = Result<RecordRef<'a>, BagError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.buf.len() {
            return None;
        }
        let start = self.pos;
        let truncated = || BagError::TruncatedRecord {
            offset: self.base + start as u64,
        };
        let Some(header_len) = read_u32(self.buf, start) else {
            self.pos = self.buf.len();
            return Some(Err(truncated()));
        };
        let header_end = start + 4 + header_len as usize;
        let Some(data_len) = read_u32(self.buf, header_end) else {
            self.pos = self.buf.len();
            return Some(Err(truncated()));
        };
        let data_start = header_end + 4;
        let data_end = data_start + data_len as usize;
        if data_end > self.buf.len() {
            self.pos = self.buf.len();
            return Some(Err(truncated()));
        }
        self.pos = data_end;
        let header = match Header::parse(&self.buf[start + 4..header_end]) {
            Ok(h) => h,
            Err(e) => return Some(Err(e)),
        };
        Some(Ok(RecordRef {
            header,
            data: &self.buf[data_start..data_end],
        }))
    }
}

/// Serializes header fields in the on-disk layout.
#[derive(Debug, Default)]
pub(crate) struct HeaderBuilder {
    buf: Vec<u8>,
}

impl HeaderBuilder {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn field(mut self, name: &str, value: &[u8]) -> Self {
        let len = (name.len() + 1 + value.len()) as u32;
        self.buf.extend_from_slice(&len.to_le_bytes());
        self.buf.extend_from_slice(name.as_bytes());
        self.buf.push(b'=');
        self.buf.extend_from_slice(value);
        self
    }

    pub(crate) fn op(self, op: u8) -> Self {
        self.field("op", &[op])
    }

    pub(crate) fn u32(self, name: &str, v: u32) -> Self {
        self.field(name, &v.to_le_bytes())
    }

    pub(crate) fn u64(self, name: &str, v: u64) -> Self {
        self.field(name, &v.to_le_bytes())
    }

    pub(crate) fn time(self, name: &str, t: TimeStamp) -> Self {
        self.field(name, &t.to_wire())
    }

    pub(crate) fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Appends one full record to `out`.
pub(crate) fn push_record(out: &mut Vec<u8>, header: &[u8], data: &[u8]) {
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(data);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let bytes = HeaderBuilder::new()
            .op(OP_CONNECTION)
            .u32("conn", 7)
            .field("topic", b"/a=b")
            .finish();
        let h = Header::parse(&bytes).unwrap();
        assert_eq!(h.op().unwrap(), OP_CONNECTION);
        assert_eq!(h.u32("conn").unwrap(), 7);
        // only the first '=' separates name from value
        assert_eq!(h.text("topic").unwrap(), "/a=b");
    }

    #[test]
    fn overrunning_field_is_rejected() {
        let mut bytes = HeaderBuilder::new().u32("conn", 1).finish();
        bytes[0] = 200;
        assert!(matches!(Header::parse(&bytes), Err(BagError::BadField { .. })));
    }

    #[test]
    fn truncated_record_reports_offset() {
        let mut buf = Vec::new();
        push_record(&mut buf, &HeaderBuilder::new().op(OP_MESSAGE_DATA).finish(), b"abcdef");
        buf.truncate(buf.len() - 2);
        let mut it = RecordIter::new(&buf, 100);
        assert!(matches!(
            it.next(),
            Some(Err(BagError::TruncatedRecord { offset: 100 }))
        ));
        assert!(it.next().is_none());
    }
}

use base64::Engine as _;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use super::schema::{FieldType, MessageSchema, Primitive};
use super::CodecError;
use crate::bag::TimeStamp;

/// Zero-width elements could otherwise make a bogus length prefix spin.
const MAX_ZERO_WIDTH_ELEMENTS: u64 = 1 << 20;

/// A decoded message tree mirroring its schema.
///
/// `uint8`/`char` arrays become [`DecodedValue::Bytes`]; every other array
/// is a list of element values.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodedValue {
    Bool(bool),
    I8(i8),
    U8(u8),
    I16(i16),
    U16(u16),
    I32(i32),
    U32(u32),
    I64(i64),
    U64(u64),
    F32(f32),
    F64(f64),
    Text(String),
    Time(TimeStamp),
    Duration { secs: i32, nsecs: i32 },
    Bytes(Vec<u8>),
    Array(Vec<DecodedValue>),
    Message(Vec<(String, DecodedValue)>),
}

impl DecodedValue {
    /// Field lookup on a message value.
    pub fn get(&self, name: &str) -> Option<&DecodedValue> {
        match self {
            DecodedValue::Message(fields) => fields.iter().find(|(n, _)| n == name).map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            DecodedValue::Bytes(b) => Some(b),
            _ => None,
        }
    }
}

/// JSON view: messages become objects, byte arrays base64 strings, times
/// `{secs, nsecs}` objects.
impl Serialize for DecodedValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            DecodedValue::Bool(v) => s.serialize_bool(*v),
            DecodedValue::I8(v) => s.serialize_i8(*v),
            DecodedValue::U8(v) => s.serialize_u8(*v),
            DecodedValue::I16(v) => s.serialize_i16(*v),
            DecodedValue::U16(v) => s.serialize_u16(*v),
            DecodedValue::I32(v) => s.serialize_i32(*v),
            DecodedValue::U32(v) => s.serialize_u32(*v),
            DecodedValue::I64(v) => s.serialize_i64(*v),
            DecodedValue::U64(v) => s.serialize_u64(*v),
            DecodedValue::F32(v) => s.serialize_f32(*v),
            DecodedValue::F64(v) => s.serialize_f64(*v),
            DecodedValue::Text(v) => s.serialize_str(v),
            DecodedValue::Time(t) => t.serialize(s),
            DecodedValue::Duration { secs, nsecs } => {
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("secs", secs)?;
                m.serialize_entry("nsecs", nsecs)?;
                m.end()
            }
            DecodedValue::Bytes(b) => {
                s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(b))
            }
            DecodedValue::Array(items) => items.serialize(s),
            DecodedValue::Message(fields) => {
                let mut m = s.serialize_map(Some(fields.len()))?;
                for (k, v) in fields {
                    m.serialize_entry(k, v)?;
                }
                m.end()
            }
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, path: &Path) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated {
                field: path.render(),
                needed: n,
                available: self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, path: &Path) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4, path)?.try_into().unwrap()))
    }
}

/// Field path for error messages, built lazily.
struct Path<'p> {
    parts: Vec<&'p str>,
}

impl<'p> Path<'p> {
    fn render(&self) -> String {
        if self.parts.is_empty() {
            "<root>".into()
        } else {
            self.parts.join(".")
        }
    }
}

fn min_wire_size(ft: &FieldType, root: &MessageSchema) -> usize {
    match ft {
        FieldType::Primitive(p) => p.width(),
        FieldType::Text | FieldType::VarArray(_) => 4,
        FieldType::Time | FieldType::Duration => 8,
        FieldType::FixedArray(elem, n) => n * min_wire_size(elem, root),
        FieldType::Nested(name) => root
            .lookup(name)
            .map(|s| s.fields.iter().map(|f| min_wire_size(&f.field_type, root)).sum())
            .unwrap_or(0),
    }
}

fn read_primitive(p: Primitive, cur: &mut Cursor<'_>, path: &Path) -> Result<DecodedValue, CodecError> {
    let b = cur.take(p.width(), path)?;
    Ok(match p {
        Primitive::Bool => DecodedValue::Bool(b[0] != 0),
        Primitive::Int8 => DecodedValue::I8(b[0] as i8),
        Primitive::UInt8 => DecodedValue::U8(b[0]),
        Primitive::Int16 => DecodedValue::I16(i16::from_le_bytes(b.try_into().unwrap())),
        Primitive::UInt16 => DecodedValue::U16(u16::from_le_bytes(b.try_into().unwrap())),
        Primitive::Int32 => DecodedValue::I32(i32::from_le_bytes(b.try_into().unwrap())),
        Primitive::UInt32 => DecodedValue::U32(u32::from_le_bytes(b.try_into().unwrap())),
        Primitive::Int64 => DecodedValue::I64(i64::from_le_bytes(b.try_into().unwrap())),
        Primitive::UInt64 => DecodedValue::U64(u64::from_le_bytes(b.try_into().unwrap())),
        Primitive::Float32 => DecodedValue::F32(f32::from_le_bytes(b.try_into().unwrap())),
        Primitive::Float64 => DecodedValue::F64(f64::from_le_bytes(b.try_into().unwrap())),
    })
}

fn read_elements<'s>(
    elem: &'s FieldType,
    count: usize,
    root: &'s MessageSchema,
    cur: &mut Cursor<'_>,
    path: &mut Path<'s>,
) -> Result<DecodedValue, CodecError> {
    if let FieldType::Primitive(Primitive::UInt8) = elem {
        return Ok(DecodedValue::Bytes(cur.take(count, path)?.to_vec()));
    }
    let min = min_wire_size(elem, root) as u64;
    let fits = if min == 0 {
        count as u64 <= MAX_ZERO_WIDTH_ELEMENTS
    } else {
        count as u64 * min <= cur.remaining() as u64
    };
    if !fits {
        return Err(CodecError::LengthOverflow {
            field: path.render(),
            len: count as u64,
        });
    }
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        items.push(read_value(elem, root, cur, path)?);
    }
    Ok(DecodedValue::Array(items))
}

fn read_value<'s>(
    ft: &'s FieldType,
    root: &'s MessageSchema,
    cur: &mut Cursor<'_>,
    path: &mut Path<'s>,
) -> Result<DecodedValue, CodecError> {
    match ft {
        FieldType::Primitive(p) => read_primitive(*p, cur, path),
        FieldType::Text => {
            let len = cur.u32(path)? as usize;
            let bytes = cur.take(len, path)?;
            Ok(DecodedValue::Text(String::from_utf8_lossy(bytes).into_owned()))
        }
        FieldType::Time => {
            let secs = cur.u32(path)?;
            let nsecs = cur.u32(path)?;
            Ok(DecodedValue::Time(TimeStamp { secs, nsecs }))
        }
        FieldType::Duration => {
            let secs = cur.u32(path)? as i32;
            let nsecs = cur.u32(path)? as i32;
            Ok(DecodedValue::Duration { secs, nsecs })
        }
        FieldType::FixedArray(elem, n) => read_elements(elem, *n, root, cur, path),
        FieldType::VarArray(elem) => {
            let n = cur.u32(path)? as usize;
            read_elements(elem, n, root, cur, path)
        }
        FieldType::Nested(name) => {
            let schema = root
                .lookup(name)
                .ok_or_else(|| CodecError::UnknownNestedType(name.clone()))?;
            read_message(schema, root, cur, path)
        }
    }
}

fn read_message<'s>(
    schema: &'s MessageSchema,
    root: &'s MessageSchema,
    cur: &mut Cursor<'_>,
    path: &mut Path<'s>,
) -> Result<DecodedValue, CodecError> {
    let mut fields = Vec::with_capacity(schema.fields.len());
    for f in &schema.fields {
        path.parts.push(&f.name);
        let v = read_value(&f.field_type, root, cur, path)?;
        path.parts.pop();
        fields.push((f.name.clone(), v));
    }
    Ok(DecodedValue::Message(fields))
}

/// Decodes one payload. Succeeds only if the layout consumes every byte.
pub fn decode(schema: &MessageSchema, payload: &[u8]) -> Result<DecodedValue, CodecError> {
    let mut cur = Cursor { buf: payload, pos: 0 };
    let mut path = Path { parts: Vec::new() };
    let value = read_message(schema, schema, &mut cur, &mut path)?;
    match cur.remaining() {
        0 => Ok(value),
        extra => Err(CodecError::TrailingBytes(extra)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::parse_schema;

    #[test]
    fn string_field() {
        let s = parse_schema("string s", "pkg/S").unwrap();
        let v = decode(&s, &[3, 0, 0, 0, 0x66, 0x6f, 0x6f]).unwrap();
        assert_eq!(v.get("s"), Some(&DecodedValue::Text("foo".into())));
    }

    #[test]
    fn empty_byte_array() {
        let s = parse_schema("uint8[] a", "pkg/A").unwrap();
        let v = decode(&s, &[0, 0, 0, 0]).unwrap();
        assert_eq!(v.get("a"), Some(&DecodedValue::Bytes(vec![])));
    }

    #[test]
    fn truncated_and_trailing() {
        let s = parse_schema("uint32 a\nuint16 b", "pkg/T").unwrap();
        assert!(matches!(
            decode(&s, &[1, 0, 0, 0, 2]),
            Err(CodecError::Truncated { ref field, needed: 2, available: 1 }) if field == "b"
        ));
        assert_eq!(decode(&s, &[1, 0, 0, 0, 2, 0, 9]), Err(CodecError::TrailingBytes(1)));
    }

    #[test]
    fn absurd_length_prefix_is_rejected_without_allocating() {
        let s = parse_schema("float64[] xs", "pkg/X").unwrap();
        assert!(matches!(
            decode(&s, &[0xff, 0xff, 0xff, 0xff, 0, 0]),
            Err(CodecError::LengthOverflow { .. })
        ));
    }

    #[test]
    fn json_view_is_an_object() {
        let s = parse_schema("string name\nuint8[] raw\ntime t", "pkg/J").unwrap();
        let mut payload = vec![2, 0, 0, 0, b'h', b'i', 2, 0, 0, 0, 0xff, 0x00];
        payload.extend_from_slice(&[5, 0, 0, 0, 6, 0, 0, 0]);
        let json = serde_json::to_value(decode(&s, &payload).unwrap()).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"name": "hi", "raw": "/wA=", "t": {"secs": 5, "nsecs": 6}})
        );
    }

    #[test]
    fn fixed_arrays_have_no_prefix() {
        let s = parse_schema("int16[2] pair", "pkg/P").unwrap();
        let v = decode(&s, &[1, 0, 0xff, 0xff]).unwrap();
        assert_eq!(
            v.get("pair"),
            Some(&DecodedValue::Array(vec![DecodedValue::I16(1), DecodedValue::I16(-1)]))
        );
    }
}

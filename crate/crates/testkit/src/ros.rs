//! Independent ROS1 serializer used as an encoding oracle.

use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const HEADER_DEFINITION: &str = "\
# Standard metadata for higher-level stamped data types.
uint32 seq
time stamp
string frame_id
";

/// sensor_msgs/Image as recorded by rosbag (with its Header dependency).
pub const IMAGE_DEFINITION: &str = "\
# This message contains an uncompressed image
# (0, 0) is at top-left corner of image
Header header        # Header timestamp should be acquisition time of image
uint32 height         # image height, that is, number of rows
uint32 width          # image width, that is, number of columns
string encoding       # Encoding of pixels -- channel meaning, ordering, size
uint8 is_bigendian    # is this data bigendian?
uint32 step           # Full row length in bytes
uint8[] data          # actual matrix data, size is (step * rows)

================================================================================
MSG: std_msgs/Header
# Standard metadata for higher-level stamped data types.
uint32 seq
time stamp
string frame_id
";

pub const COMPRESSED_IMAGE_DEFINITION: &str = "\
Header header
string format
uint8[] data

================================================================================
MSG: std_msgs/Header
uint32 seq
time stamp
string frame_id
";

pub const AUDIO_DATA_DEFINITION: &str = "uint8[] data\n";

/// Oracle-side field types.
#[derive(Debug, Clone, PartialEq)]
pub enum OType {
    Bool,
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    I64,
    U64,
    F32,
    F64,
    Str,
    Time,
    Duration,
    Fixed(Box<OType>, usize),
    Var(Box<OType>),
    Msg(String),
}

impl OType {
    pub fn ros_name(&self) -> String {
        match self {
            OType::Bool => "bool".into(),
            OType::I8 => "int8".into(),
            OType::U8 => "uint8".into(),
            OType::I16 => "int16".into(),
            OType::U16 => "uint16".into(),
            OType::I32 => "int32".into(),
            OType::U32 => "uint32".into(),
            OType::I64 => "int64".into(),
            OType::U64 => "uint64".into(),
            OType::F32 => "float32".into(),
            OType::F64 => "float64".into(),
            OType::Str => "string".into(),
            OType::Time => "time".into(),
            OType::Duration => "duration".into(),
            OType::Fixed(t, n) => format!("{}[{}]", t.ros_name(), n),
            OType::Var(t) => format!("{}[]", t.ros_name()),
            OType::Msg(name) => name.clone(),
        }
    }
}

/// A message type: full name plus ordered fields.
#[derive(Debug, Clone, PartialEq)]
pub struct OMsg {
    pub name: String,
    pub fields: Vec<(String, OType)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OValue {
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
    Str(String),
    Time(u32, u32),
    Duration(i32, i32),
    List(Vec<OValue>),
    Msg(Vec<OValue>),
}

/// Concatenated definition text in rosbag's layout: the root body, then each
/// dependency after an 80 '=' separator and a `MSG:` line. A constant and a
/// comment are sprinkled in to exercise the grammar.
pub fn definition_text(root: &OMsg, deps: &[OMsg]) -> String {
    let mut out = String::new();
    write_body(&mut out, root);
    for dep in deps {
        out.push_str(&"=".repeat(80));
        out.push('\n');
        let _ = writeln!(out, "MSG: {}", dep.name);
        write_body(&mut out, dep);
    }
    out
}

fn write_body(out: &mut String, msg: &OMsg) {
    let _ = writeln!(out, "# {} generated", msg.name);
    let _ = writeln!(out, "uint8 SOME_CONSTANT=7");
    for (name, ty) in &msg.fields {
        let _ = writeln!(out, "{} {}  # field", ty.ros_name(), name);
    }
    out.push('\n');
}

pub fn encode(ty: &OType, value: &OValue, registry: &BTreeMap<String, OMsg>, out: &mut Vec<u8>) {
    match (ty, value) {
        (OType::Bool, OValue::Bool(v)) => out.push(*v as u8),
        (OType::I8, OValue::I8(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (OType::U8, OValue::U8(v)) => out.push(*v),
        (OType::I16, OValue::I16(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (OType::U16, OValue::U16(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (OType::I32, OValue::I32(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (OType::U32, OValue::U32(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (OType::I64, OValue::I64(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (OType::U64, OValue::U64(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (OType::F32, OValue::F32(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (OType::F64, OValue::F64(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (OType::Str, OValue::Str(s)) => {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        (OType::Time, OValue::Time(s, n)) => {
            out.extend_from_slice(&s.to_le_bytes());
            out.extend_from_slice(&n.to_le_bytes());
        }
        (OType::Duration, OValue::Duration(s, n)) => {
            out.extend_from_slice(&s.to_le_bytes());
            out.extend_from_slice(&n.to_le_bytes());
        }
        (OType::Fixed(elem, n), OValue::List(items)) => {
            assert_eq!(items.len(), *n, "fixed array length");
            for item in items {
                encode(elem, item, registry, out);
            }
        }
        (OType::Var(elem), OValue::List(items)) => {
            out.extend_from_slice(&(items.len() as u32).to_le_bytes());
            for item in items {
                encode(elem, item, registry, out);
            }
        }
        (OType::Msg(name), OValue::Msg(values)) => {
            let msg = &registry[name];
            assert_eq!(msg.fields.len(), values.len());
            for ((_, fty), v) in msg.fields.iter().zip(values) {
                encode(fty, v, registry, out);
            }
        }
        (t, v) => panic!("oracle type/value mismatch: {t:?} vs {v:?}"),
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

pub fn encode_header(out: &mut Vec<u8>, seq: u32, secs: u32, nsecs: u32, frame_id: &str) {
    put_u32(out, seq);
    put_u32(out, secs);
    put_u32(out, nsecs);
    put_str(out, frame_id);
}

/// sensor_msgs/Image payload.
#[allow(clippy::too_many_arguments)]
pub fn encode_image(
    seq: u32,
    stamp: (u32, u32),
    height: u32,
    width: u32,
    encoding: &str,
    is_bigendian: bool,
    step: u32,
    data: &[u8],
) -> Vec<u8> {
    let mut out = Vec::new();
    encode_header(&mut out, seq, stamp.0, stamp.1, "camera");
    put_u32(&mut out, height);
    put_u32(&mut out, width);
    put_str(&mut out, encoding);
    out.push(is_bigendian as u8);
    put_u32(&mut out, step);
    put_bytes(&mut out, data);
    out
}

/// sensor_msgs/CompressedImage payload.
pub fn encode_compressed_image(seq: u32, stamp: (u32, u32), format: &str, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    encode_header(&mut out, seq, stamp.0, stamp.1, "camera");
    put_str(&mut out, format);
    put_bytes(&mut out, data);
    out
}

/// audio_common_msgs/AudioData payload.
pub fn encode_audio(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    put_bytes(&mut out, data);
    out
}

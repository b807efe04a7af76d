//! Generic ROS1 message decoding.
//!
//! Schemas come from the `message_definition` text stored in each bag
//! connection, so any custom message type recorded in a bag can be decoded
//! without compiled-in type tables. Images and audio get dedicated fast
//! paths in [`media`].

mod decode;
pub mod media;
mod schema;

use thiserror::Error;

pub use decode::{decode, DecodedValue};
pub use media::{decode_audio, decode_audio_with, decode_image, AudioChunk, ImageFrame, DEFAULT_AUDIO_TYPES};
pub use schema::{parse_schema, Field, FieldType, MessageSchema, Primitive};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("line {line}: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("unknown nested type '{0}'")]
    UnknownNestedType(String),
    #[error("type '{0}' contains itself")]
    RecursiveType(String),
    #[error("payload truncated at '{field}': need {needed} bytes, {available} left")]
    Truncated {
        field: String,
        needed: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("array length {len} at '{field}' cannot fit in the payload")]
    LengthOverflow { field: String, len: u64 },
    #[error("image data is {actual} bytes, step x height = {expected}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("connection type '{found}' cannot be decoded as {expected}")]
    TypeMismatch { expected: String, found: String },
    #[error("audio message carries no data")]
    EmptyAudio,
}

//! Core of the ROSBag annotation workbench.
//!
//! The crate is organised along the path a recording takes:
//!
//! * [`bag`] parses ROSBag v2.0 files (and writes fixtures for tests).
//! * [`codec`] decodes ROS1-serialized payloads from their embedded
//!   message definitions, with fast paths for images and audio.
//! * [`media`] turns a bag into an MJPEG AVI, a WAV file, a frame index and
//!   an optional transcript, cached per bag.
//! * [`annotation`] holds the tiered annotation document, codebooks and CSV
//!   export.
//! * [`stats`] computes the overall and per-tier annotation metrics.
//! * [`assist`] runs the LLM-assisted annotation loop.
//!
//! Data-parallel work (frame encoding, chunk decompression, per-tier
//! statistics) goes through [`exec::Exec`]; with the `parallel` feature
//! disabled every path runs sequentially.

pub mod annotation;
pub mod assist;
pub mod bag;
pub mod codec;
pub mod exec;
pub mod layout;
pub mod media;
pub mod stats;

pub use bag::{BagHandle, Connection, RawMessage, TimeStamp};
pub use exec::Exec;

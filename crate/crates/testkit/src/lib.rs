//! Test-only oracles and fixtures.
//!
//! Everything here is written independently of the production code paths it
//! checks: the ROS serializer, the LZ4 frame writer, the CSV reader, the
//! statistics and tier models and the HTTP stub share no code with
//! `rosann-core`'s decoders, exporters and clients.

pub mod codec_cases;
pub mod csv_oracle;
pub mod fixtures;
pub mod http_stub;
pub mod lz4;
pub mod ros;
pub mod stats_oracle;
pub mod tiers;

//! HTTP service and command-line front end over `rosann-core`.

pub mod api;
pub mod app;
pub mod cli;
pub mod error;
pub mod jobs;

pub use api::router;
pub use app::AppState;
pub use error::ApiError;

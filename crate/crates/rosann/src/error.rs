//! The error envelope shared by the HTTP API and the CLI.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use rosann_core::annotation::AnnotationError;
use rosann_core::assist::AssistError;
use rosann_core::bag::BagError;
use rosann_core::media::MediaError;
use rosann_core::stats::StatsError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    /// Machine-readable code such as `OVERLAP` or `NOT_FOUND`.
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip)]
    pub status: u16,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            code: code.into(),
            message: message.into(),
            field: None,
            status,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> ApiError {
        self.field = Some(field.into());
        self
    }

    pub fn not_found(message: impl Into<String>) -> ApiError {
        ApiError::new(404, "NOT_FOUND", message)
    }

    pub fn validation(message: impl Into<String>) -> ApiError {
        ApiError::new(422, "VALIDATION", message)
    }

    pub fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(500, "INTERNAL", message)
    }

    /// Single-line form for stderr.
    pub fn line(&self) -> String {
        match &self.field {
            Some(f) => format!("{}: {} (field {f})", self.code, self.message),
            None => format!("{}: {}", self.code, self.message),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(serde_json::json!({ "error": self }))).into_response()
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> ApiError {
        let msg = e.to_string();
        match e {
            AnnotationError::DuplicateTierName(_) => ApiError::new(409, "DUPLICATE", msg).with_field("name"),
            AnnotationError::DuplicateCode(_) => ApiError::new(409, "DUPLICATE", msg).with_field("codes"),
            AnnotationError::DuplicateCodebook(_) => ApiError::new(409, "DUPLICATE", msg).with_field("name"),
            AnnotationError::Overlap { .. } => ApiError::new(409, "OVERLAP", msg),
            AnnotationError::UnknownCodebook(_) => ApiError::new(404, "NOT_FOUND", msg).with_field("codebook_ref"),
            AnnotationError::UnknownTier(_) => ApiError::new(404, "NOT_FOUND", msg).with_field("tier"),
            AnnotationError::UnknownAnnotation(_) => ApiError::new(404, "NOT_FOUND", msg),
            AnnotationError::CodeNotInCodebook { .. } => ApiError::new(422, "CODE_NOT_IN_CODEBOOK", msg).with_field("value"),
            AnnotationError::OutOfRange { .. } => ApiError::new(422, "OUT_OF_RANGE", msg),
            AnnotationError::InvalidTier(_) => ApiError::new(422, "VALIDATION", msg),
            AnnotationError::Parse(_) => ApiError::new(422, "PARSE", msg),
            AnnotationError::SchemaVersionMismatch { .. } => ApiError::new(500, "SCHEMA_VERSION", msg),
            AnnotationError::InvariantViolation { .. } => ApiError::new(500, "CORRUPT_PROJECT", msg),
            AnnotationError::Io(_) => ApiError::new(500, "IO", msg),
        }
    }
}

impl From<BagError> for ApiError {
    fn from(e: BagError) -> ApiError {
        match e {
            BagError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => ApiError::not_found(io.to_string()),
            other => ApiError::new(422, "BAG", other.to_string()),
        }
    }
}

impl From<MediaError> for ApiError {
    fn from(e: MediaError) -> ApiError {
        match e {
            MediaError::NotProcessed(id) => ApiError::not_found(format!("bag '{id}' has not been processed")),
            MediaError::EmptyIndex => ApiError::not_found("no video frames"),
            MediaError::Bag(b) => b.into(),
            other => ApiError::new(500, "MEDIA", other.to_string()),
        }
    }
}

impl From<AssistError> for ApiError {
    fn from(e: AssistError) -> ApiError {
        let msg = e.to_string();
        match e {
            AssistError::Auth(_) => ApiError::new(401, "AUTH", msg),
            AssistError::Transport { .. } | AssistError::BadResponse(_) => ApiError::new(502, "UPSTREAM", msg),
            AssistError::PayloadTooLarge => ApiError::new(413, "PAYLOAD_TOO_LARGE", msg),
            AssistError::NoJsonFound => ApiError::new(422, "NO_JSON_FOUND", msg),
            AssistError::Media(m) => m.into(),
            AssistError::Annotation(a) => a.into(),
        }
    }
}

impl From<StatsError> for ApiError {
    fn from(e: StatsError) -> ApiError {
        ApiError::validation(e.to_string()).with_field("t_ms")
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> ApiError {
        if e.kind() == std::io::ErrorKind::NotFound {
            ApiError::not_found(e.to_string())
        } else {
            ApiError::new(500, "IO", e.to_string())
        }
    }
}

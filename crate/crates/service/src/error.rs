use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use rcs_core::content::ContentError;
use rcs_core::session::{SessionError, StoreError};
use rcs_core::survey::SurveyError;
use rcs_core::telemetry::{TelemetryError, TelemetryStoreError};

/// Wire error: `{code, message, field?, current_question?}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub current_question: Option<String>,
}

impl ApiError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status: status_for(code),
            code,
            message: message.into(),
            field: None,
            current_question: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn with_current(mut self, node: Option<&str>) -> Self {
        self.current_question = node.map(str::to_string);
        self
    }

    pub fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new("NOT_FOUND", format!("{what} not found"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new("BAD_REQUEST", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new("INTERNAL", message)
    }
}

fn status_for(code: &str) -> StatusCode {
    match code {
        "NOT_FOUND" => StatusCode::NOT_FOUND,
        "BAD_REQUEST" => StatusCode::BAD_REQUEST,
        "UNSUPPORTED_MEDIA_TYPE" => StatusCode::UNSUPPORTED_MEDIA_TYPE,
        "OUT_OF_ORDER"
        | "OUT_OF_ORDER_TS"
        | "DUPLICATE_SUBMISSION"
        | "SESSION_FINALIZED"
        | "NOT_FINALIZED"
        | "DUPLICATE_RESPONSE"
        | "VERSION_MISMATCH" => StatusCode::CONFLICT,
        "INTERNAL" | "IO_ERROR" | "CORRUPT_LOG" | "INVALID_STREAM" => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        (self.status, Json(self)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let err = Self::new(e.code(), e.to_string());
        match &e {
            SessionError::OutOfOrder { expected, .. } => {
                err.with_field("node_id").with_current(expected.question())
            }
            SessionError::IncompletePath { next } => err.with_current(next.question()),
            SessionError::IllegalAnswer { .. } => err.with_field("answer"),
            SessionError::UnknownNode(_) => err.with_field("node_id"),
            SessionError::TutorialNotConfirmed => err.with_field("tutorial_confirmed"),
            SessionError::InvalidMetadata { field } => err.with_field(format!("metadata.{field}")),
            _ => err,
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) | StoreError::InvalidId(id) => {
                Self::not_found(format!("session `{id}`"))
            }
            StoreError::Session(e) => e.into(),
            other => Self::new(other.code(), other.to_string()),
        }
    }
}

impl From<TelemetryError> for ApiError {
    fn from(e: TelemetryError) -> Self {
        let err = Self::new(e.code(), e.to_string());
        match e.field() {
            Some(f) => err.with_field(f),
            None => err,
        }
    }
}

impl From<TelemetryStoreError> for ApiError {
    fn from(e: TelemetryStoreError) -> Self {
        Self::new("IO_ERROR", e.to_string())
    }
}

impl From<SurveyError> for ApiError {
    fn from(e: SurveyError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<ContentError> for ApiError {
    fn from(e: ContentError) -> Self {
        match e {
            ContentError::UnknownNode(id) => Self::not_found(format!("node `{id}`")),
            other => Self::new(other.code(), other.to_string()),
        }
    }
}

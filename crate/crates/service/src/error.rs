use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};
use vignette_core::extract::ExtractError;
use vignette_core::runtime::RuntimeError;

/// Error body: `{code, message, details}`.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub details: Value,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code: code.into(), message: message.into(), details: Value::Null } }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.body.details = details;
        self
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("unknown {what} {id}"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", r.body_text())
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        Self::internal(format!("store: {e}"))
    }
}

impl From<ExtractError> for ApiError {
    fn from(e: ExtractError) -> Self {
        let message = e.to_string();
        match e {
            ExtractError::EmptyStory => Self::new(StatusCode::BAD_REQUEST, "EMPTY_STORY", message),
            ExtractError::StoryTooLong { len, max } => {
                Self::new(StatusCode::BAD_REQUEST, "STORY_TOO_LONG", message).with_details(json!({ "len": len, "max": max }))
            }
            ExtractError::NotFirstPerson => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "NOT_FIRST_PERSON", message),
            ExtractError::CapExceeded { characters, max } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "CAP_EXCEEDED", message)
                .with_details(json!({ "characters": characters, "max": max })),
            ExtractError::Gateway(_) => Self::new(StatusCode::BAD_GATEWAY, "GATEWAY", message),
            ExtractError::Schema { template, .. } => {
                Self::new(StatusCode::BAD_GATEWAY, "SCHEMA", message).with_details(json!({ "template": template }))
            }
            ExtractError::StageViolation { expected, actual } => Self::new(StatusCode::CONFLICT, "STAGE_VIOLATION", message)
                .with_details(json!({ "expected": expected, "actual": actual })),
            ExtractError::UnknownLayout(id) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "UNKNOWN_LAYOUT", message).with_details(json!({ "layout_id": id }))
            }
            ExtractError::Invalid(report) => {
                let code = report.violations.first().map(|v| v.code.as_str()).unwrap_or_else(|| "INVALID".into());
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message).with_details(json!(report))
            }
        }
    }
}

impl From<RuntimeError> for ApiError {
    fn from(e: RuntimeError) -> Self {
        let message = e.to_string();
        match e {
            RuntimeError::Invalid(report) => {
                let code = report.violations.first().map(|v| v.code.as_str()).unwrap_or_else(|| "INVALID".into());
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message).with_details(json!(report))
            }
            RuntimeError::Ended => Self::new(StatusCode::GONE, "SESSION_ENDED", message),
            RuntimeError::UnknownNpc(_) | RuntimeError::UnknownObject(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "UNKNOWN_REF", message),
            RuntimeError::NotInZone(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "NOT_IN_ZONE", message),
        }
    }
}

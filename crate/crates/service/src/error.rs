use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

/// Request-level failure, rendered as `{"error", "message", "path"?}`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error("{message}")]
    BadRequest { message: String, path: Option<String> },
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Unavailable(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest { .. } => "bad_request",
            ApiError::NotFound(_) => "not_found",
            ApiError::Conflict(_) => "conflict",
            ApiError::Unprocessable(_) => "unprocessable",
            ApiError::Unavailable(_) => "unavailable",
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: self.code().into(),
            message: self.to_string(),
            path: match self {
                ApiError::BadRequest { path, .. } => path.clone(),
                _ => None,
            },
        }
    }

    /// Inverse of [`IntoResponse`], used by the remote extraction client.
    pub fn from_status(status: u16, body: Option<ErrorBody>) -> Self {
        let message = body
            .as_ref()
            .map(|b| b.message.clone())
            .unwrap_or_else(|| format!("HTTP {status}"));
        match status {
            400 => ApiError::BadRequest {
                message,
                path: body.and_then(|b| b.path),
            },
            404 => ApiError::NotFound(message),
            409 => ApiError::Conflict(message),
            422 => ApiError::Unprocessable(message),
            503 => ApiError::Unavailable(message),
            _ => ApiError::Internal(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if let ApiError::Internal(m) = &self {
            tracing::error!(message = %m, "request failed");
        }
        (self.status(), Json(self.body())).into_response()
    }
}

impl From<policyloop_core::Error> for ApiError {
    fn from(e: policyloop_core::Error) -> Self {
        use policyloop_core::Error as E;
        match e {
            E::Parse { path, message } => ApiError::BadRequest {
                message: format!("parse error at `{path}`: {message}"),
                path: Some(path),
            },
            E::EmptyDocument | E::OrphanAnnotation { .. } => ApiError::BadRequest {
                message: e.to_string(),
                path: None,
            },
            E::UnknownLabel(_) => ApiError::NotFound(e.to_string()),
            E::Argument(_) | E::Validation(_) => ApiError::Unprocessable(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

/// Startup failure.
#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no extractor registry at {0}; run `policyloop init-registry` first")]
    MissingRegistry(PathBuf),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] policyloop_core::Error),
    #[error("extraction backend unavailable: {0}")]
    Backend(ApiError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

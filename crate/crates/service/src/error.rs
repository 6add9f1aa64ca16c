use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

/// An HTTP status plus a message, rendered as `{"error": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{status}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<alpp_core::Error> for ApiError {
    fn from(e: alpp_core::Error) -> Self {
        use alpp_core::Error as E;
        let status = match &e {
            E::Io { .. }
            | E::Csv(_)
            | E::HeaderMismatch { .. }
            | E::UnparseableNumber { .. }
            | E::UnknownLabel { .. }
            | E::UnknownCategory { .. }
            | E::InvalidSchema(_)
            | E::InsufficientClass { .. }
            | E::InvalidTrainConfig(_)
            | E::InvalidRanking(_)
            | E::MismatchedUniverse(_)
            | E::TopKOutOfRange { .. }
            | E::CommitteeTooSmall { .. }
            | E::Config(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}
